// ntm: train, evaluate and inspect Neural Turing Machine models.
//
// Exit status: 0 success, 1 check failed or training diverged,
// 2 usage or configuration error, 3 unreadable or corrupt file.

#include <cstdio>
#include <filesystem>
#include <fstream>
#include <iostream>
#include <memory>
#include <optional>
#include <string>
#include <vector>

#include "CLI11.hpp"
#include "ntm/checkpoint.hpp"
#include "ntm/config.hpp"
#include "ntm/errors.hpp"
#include "ntm/model_check.hpp"
#include "ntm/report.hpp"
#include "ntm/training.hpp"

namespace {

constexpr int kExitOk = 0;
constexpr int kExitFailed = 1;
constexpr int kExitUsage = 2;
constexpr int kExitFormat = 3;

struct TaskOverrides {
  std::string task;
  std::optional<std::size_t> len;
  std::optional<std::size_t> repeats;
  std::optional<std::size_t> items;

  void add_to(CLI::App& cmd) {
    cmd.add_option("--task", task, "Task (defaults to the checkpoint's task)");
    cmd.add_option("--len", len, "Fix the sequence length");
    cmd.add_option("--repeats", repeats, "Fix the repeat count");
    cmd.add_option("--items", items, "Fix the number of recall items");
  }

  ntm::TaskConfig apply(ntm::TaskConfig base) const {
    if (!task.empty()) {
      const ntm::TaskKind kind = ntm::parse_task_kind(task);
      if (kind != base.kind) base = ntm::default_task_config(kind);
    }
    if (len) base.min_length = base.max_length = *len;
    if (repeats) base.min_repeats = base.max_repeats = *repeats;
    if (items) base.min_items = base.max_items = *items;
    base.validate();
    return base;
  }
};

struct LoadedModel {
  ntm::TrainConfig config;
  std::unique_ptr<ntm::SequenceModel> model;
};

LoadedModel load_model(const std::string& path) {
  ntm::Checkpoint ck = ntm::load_checkpoint(path);
  LoadedModel out{ck.config, ntm::make_model(ck.config.model)};
  ntm::assign_parameters(out.model->params(), ck.params);
  return out;
}

void check_channels(const ntm::ModelConfig& model, const ntm::TaskConfig& task) {
  const auto ch = task.channels();
  if (ch.input_width != model.input_width || ch.output_width != model.output_width) {
    throw ntm::ConfigError("task " + ntm::to_string(task.kind) + " needs " +
                           std::to_string(ch.input_width) + " inputs and " +
                           std::to_string(ch.output_width) + " outputs; the model has " +
                           std::to_string(model.input_width) + " and " +
                           std::to_string(model.output_width));
  }
}

void write_text(const std::string& path, const std::string& text) {
  if (path.empty() || path == "-") {
    std::cout << text;
    return;
  }
  std::ofstream out(path);
  if (!out) throw ntm::ConfigError("cannot write '" + path + "'");
  out << text;
}

std::vector<std::size_t> parse_values(const std::string& text) {
  std::vector<std::size_t> values;
  std::size_t pos = 0;
  while (pos <= text.size()) {
    const std::size_t end = std::min(text.find(',', pos), text.size());
    const std::string item = text.substr(pos, end - pos);
    try {
      std::size_t used = 0;
      const long long v = std::stoll(item, &used);
      if (used != item.size() || v <= 0) throw std::invalid_argument(item);
      values.push_back(static_cast<std::size_t>(v));
    } catch (const std::exception&) {
      throw ntm::ConfigError("bad value '" + item + "' in list '" + text + "'");
    }
    pos = end + 1;
  }
  return values;
}

}  // namespace

int main(int argc, char** argv) {
  CLI::App app{"Neural Turing Machine trainer and diagnostics"};
  app.require_subcommand(1);

  // train
  auto* train = app.add_subcommand("train", "Train a model from a config file");
  std::string train_config, train_resume, train_output;
  std::optional<std::size_t> train_episodes;
  std::optional<std::uint64_t> train_seed;
  train->add_option("--config", train_config, "Config file")->check(CLI::ExistingFile);
  train->add_option("--checkpoint", train_resume, "Resume from this checkpoint");
  train->add_option("--episodes", train_episodes, "Total training sequences");
  train->add_option("--seed", train_seed, "Episode stream seed");
  train->add_option("--output", train_output, "Output directory");

  // eval
  auto* eval = app.add_subcommand("eval", "Per-episode costs of a checkpoint as CSV");
  std::string eval_ckpt, eval_output;
  std::size_t eval_episodes = 100;
  std::uint64_t eval_seed = 1000;
  TaskOverrides eval_task;
  eval->add_option("--checkpoint", eval_ckpt, "Checkpoint file")->required();
  eval->add_option("--episodes", eval_episodes, "Episodes to evaluate");
  eval->add_option("--seed", eval_seed, "Evaluation seed");
  eval->add_option("--output", eval_output, "CSV path (default stdout)");
  eval_task.add_to(*eval);

  // sweep
  auto* sweep = app.add_subcommand("sweep", "Generalization sweep along one axis as CSV");
  std::string sweep_ckpt, sweep_axis, sweep_values, sweep_output;
  std::size_t sweep_episodes = 100;
  std::uint64_t sweep_seed = 2000;
  TaskOverrides sweep_task;
  sweep->add_option("--checkpoint", sweep_ckpt, "Checkpoint file")->required();
  sweep->add_option("--axis", sweep_axis, "length, repeats or items")->required();
  sweep->add_option("--values", sweep_values, "Comma-separated axis values")->required();
  sweep->add_option("--episodes", sweep_episodes, "Episodes per value");
  sweep->add_option("--seed", sweep_seed, "Evaluation seed");
  sweep->add_option("--output", sweep_output, "CSV path (default stdout)");
  sweep_task.add_to(*sweep);

  // gradcheck
  auto* gradcheck = app.add_subcommand("gradcheck", "Finite-difference gradient check");
  std::string gc_model = "ntm-ff", gc_hidden, gc_task = "copy";
  std::size_t gc_n = 8, gc_m = 4, gc_steps = 3, gc_heads = 1, gc_shift = 1;
  std::uint64_t gc_seed = 1;
  double gc_eps = 1e-5, gc_tol = 1e-4;
  gradcheck->add_option("--model", gc_model, "ntm-ff, ntm-lstm or lstm");
  gradcheck->add_option("--hidden", gc_hidden, "Layer widths (default 16 for ntm-ff, 3x16 otherwise)");
  gradcheck->add_option("--n", gc_n, "Memory locations");
  gradcheck->add_option("--m", gc_m, "Memory width");
  gradcheck->add_option("--heads", gc_heads, "Read and write heads each");
  gradcheck->add_option("--shift-range", gc_shift, "Shift range R");
  gradcheck->add_option("--steps", gc_steps, "Unrolled steps");
  gradcheck->add_option("--task", gc_task, "Task whose channel layout is used");
  gradcheck->add_option("--seed", gc_seed, "Seed for parameters and input");
  gradcheck->add_option("--eps", gc_eps, "Finite-difference step");
  gradcheck->add_option("--tol", gc_tol, "Maximum relative error");

  // trace
  auto* trace = app.add_subcommand("trace", "Export per-step memory panels for one episode");
  std::string trace_ckpt, trace_output = "trace";
  std::uint64_t trace_seed = 3000;
  TaskOverrides trace_task;
  trace->add_option("--checkpoint", trace_ckpt, "Checkpoint file")->required();
  trace->add_option("--output", trace_output, "Output directory");
  trace->add_option("--seed", trace_seed, "Episode seed");
  trace_task.add_to(*trace);

  // fit-sort
  auto* fit = app.add_subcommand("fit-sort", "Fit write location against priority");
  std::string fit_ckpt, fit_output;
  std::size_t fit_episodes = 10;
  std::uint64_t fit_seed = 4000;
  fit->add_option("--checkpoint", fit_ckpt, "Priority-sort checkpoint")->required();
  fit->add_option("--episodes", fit_episodes, "Episodes pooled into the fit");
  fit->add_option("--seed", fit_seed, "Evaluation seed");
  fit->add_option("--output", fit_output, "Directory for the first episode's panels");

  try {
    app.parse(argc, argv);
  } catch (const CLI::ParseError& e) {
    return app.exit(e) == 0 ? kExitOk : kExitUsage;
  }

  try {
    if (*train) {
      if (train_config.empty() && train_resume.empty()) {
        throw ntm::ConfigError("train needs --config or --checkpoint");
      }
      ntm::TrainConfig cfg;
      if (!train_resume.empty()) cfg = ntm::load_checkpoint(train_resume).config;
      if (!train_config.empty()) cfg = ntm::load_train_config(train_config, cfg);
      if (train_episodes) cfg.episodes = *train_episodes;
      if (train_seed) cfg.seed = *train_seed;
      if (!train_output.empty()) cfg.output_dir = train_output;
      cfg.validate();
      const ntm::TrainResult r = ntm::train(cfg, train_resume);
      if (!r.log.empty()) {
        std::printf("episodes %zu, last median %.6g bits/seq\n", r.log.back().sequences,
                    r.log.back().median_window);
      }
      std::printf("log: %s\ncheckpoint: %s\n", r.log_path.c_str(), r.checkpoint_path.c_str());
      return kExitOk;
    }

    if (*eval) {
      LoadedModel m = load_model(eval_ckpt);
      const ntm::TaskConfig task = eval_task.apply(m.config.task);
      check_channels(m.config.model, task);
      const ntm::EvalStats stats =
          ntm::evaluate(*m.model, task, eval_episodes, eval_seed, ntm::evaluation_threads());
      std::string csv = "episode,bits_per_seq\n";
      char buf[64];
      for (std::size_t i = 0; i < stats.costs.size(); ++i) {
        std::snprintf(buf, sizeof(buf), "%zu,%.9g\n", i, stats.costs[i]);
        csv += buf;
      }
      write_text(eval_output, csv);
      std::fprintf(stderr, "mean %.6g median %.6g bits/seq\n", stats.mean, stats.median);
      return kExitOk;
    }

    if (*sweep) {
      LoadedModel m = load_model(sweep_ckpt);
      const ntm::TaskConfig task = sweep_task.apply(m.config.task);
      check_channels(m.config.model, task);
      const ntm::SweepAxis axis = ntm::parse_sweep_axis(sweep_axis);
      const auto values = parse_values(sweep_values);
      const auto rows = ntm::generalization_sweep(*m.model, task, axis, values, sweep_episodes,
                                                  sweep_seed, ntm::evaluation_threads());
      write_text(sweep_output, ntm::sweep_csv(axis, rows));
      return kExitOk;
    }

    if (*gradcheck) {
      ntm::ModelConfig mc;
      ntm::apply_model_name(mc, gc_model);
      if (gc_hidden.empty()) {
        gc_hidden = (mc.kind == ntm::ModelKind::kNtm && mc.controller == ntm::ControllerKind::kFeedforward)
                        ? "16"
                        : "3x16";
      }
      mc.hidden = ntm::parse_layer_list(gc_hidden);
      mc.memory_rows = gc_n;
      mc.memory_width = gc_m;
      mc.read_heads = mc.write_heads = gc_heads;
      mc.shift_range = gc_shift;
      const auto ch = ntm::default_task_config(ntm::parse_task_kind(gc_task)).channels();
      mc.input_width = ch.input_width;
      mc.output_width = ch.output_width;
      mc.validate();
      const ntm::GradientCheckReport r =
          ntm::check_model_gradients(mc, gc_steps, gc_seed, gc_eps, gc_tol);
      std::printf("model %s, %zu parameters checked\n", mc.name().c_str(), r.checked);
      std::printf("max_rel_err %.6e (%s[%zu]: analytic %.9e, numeric %.9e)\n", r.max_rel_err,
                  r.worst_param.c_str(), r.worst_index, r.worst_analytic, r.worst_numeric);
      std::printf("%s\n", r.passed ? "PASS" : "FAIL");
      return r.passed ? kExitOk : kExitFailed;
    }

    if (*trace) {
      LoadedModel m = load_model(trace_ckpt);
      const ntm::TaskConfig task = trace_task.apply(m.config.task);
      check_channels(m.config.model, task);
      if (m.config.model.kind != ntm::ModelKind::kNtm) {
        throw ntm::ConfigError("trace needs an NTM checkpoint");
      }
      const ntm::Episode episode = ntm::generate_episode(task, trace_seed);
      const ntm::TraceLog log = ntm::record_trace(*m.model, episode);
      const auto files = ntm::export_trace(log, trace_output);
      std::printf("wrote %zu files to %s\n", files.size(), trace_output.c_str());
      if (episode.task == ntm::TaskKind::kCopy) {
        const auto s = ntm::score_copy_trace(log, episode);
        std::printf("read/write location match %zu/%zu (%.4f), correlation %.4f\n", s.matched,
                    s.compared, s.match_fraction, s.correlation);
      }
      return kExitOk;
    }

    if (*fit) {
      LoadedModel m = load_model(fit_ckpt);
      if (m.config.task.kind != ntm::TaskKind::kPrioritySort || m.config.model.kind != ntm::ModelKind::kNtm) {
        throw ntm::ConfigError("fit-sort needs an NTM priority-sort checkpoint");
      }
      std::vector<ntm::LocationSample> argmax_samples, expected_samples;
      for (std::size_t i = 0; i < fit_episodes; ++i) {
        const ntm::Episode e = ntm::generate_episode(m.config.task, ntm::derive_seed(fit_seed, i));
        const ntm::TraceLog log = ntm::record_trace(*m.model, e);
        if (i == 0 && !fit_output.empty()) ntm::export_trace(log, fit_output);
        for (const auto& s : ntm::sort_write_samples(log, e, ntm::LocationMode::kArgmax)) {
          argmax_samples.push_back(s);
        }
        for (const auto& s : ntm::sort_write_samples(log, e, ntm::LocationMode::kExpected)) {
          expected_samples.push_back(s);
        }
      }
      std::printf("location,points,slope,intercept,residual_rms\n");
      for (const auto& [name, samples] :
           {std::pair{"argmax", &argmax_samples}, std::pair{"expected", &expected_samples}}) {
        const ntm::WriteLocationFit f = ntm::fit_write_locations(*samples);
        if (f.defined) {
          std::printf("%s,%zu,%.9g,%.9g,%.9g\n", name, f.points, f.slope, f.intercept,
                      f.residual_rms);
        } else {
          std::printf("%s,%zu,undefined,%.9g,undefined\n", name, f.points, f.intercept);
        }
      }
      return kExitOk;
    }
  } catch (const ntm::ConfigError& e) {
    std::fprintf(stderr, "usage error: %s\n", e.what());
    return kExitUsage;
  } catch (const ntm::FormatError& e) {
    std::fprintf(stderr, "load error: %s\n", e.what());
    return kExitFormat;
  } catch (const ntm::TrainingDiverged& e) {
    std::fprintf(stderr, "training diverged: %s (episode seed %llu)\n", e.what(),
                 static_cast<unsigned long long>(e.episode_seed()));
    return kExitFailed;
  } catch (const std::exception& e) {
    std::fprintf(stderr, "error: %s\n", e.what());
    return kExitFailed;
  }
  return kExitOk;
}

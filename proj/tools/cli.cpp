// SPDX-License-Identifier: Apache-2.0
#include "cli.hpp"

#include <algorithm>
#include <charconv>
#include <cstdlib>
#include <filesystem>
#include <fstream>
#include <functional>
#include <ostream>
#include <sstream>
#include <string>
#include <thread>
#include <tuple>
#include <utility>
#include <vector>

#include "CLI11.hpp"
#include "stlstm/checkpoint.hpp"
#include "stlstm/data.hpp"
#include "stlstm/errors.hpp"
#include "stlstm/metrics.hpp"
#include "stlstm/model.hpp"
#include "stlstm/synthetic.hpp"
#include "stlstm/train.hpp"

namespace stlstm::cli {

namespace {

namespace fs = std::filesystem;

/// Thrown for verification failures (exit 4) after the report is printed.
struct VerificationFailed {};

std::string num(double v) {
  char buf[64];
  auto [end, ec] = std::to_chars(buf, buf + sizeof buf, v);
  return ec == std::errc() ? std::string(buf, end) : std::string("nan");
}

template <typename T>
std::string num(T v) requires std::is_integral_v<T> {
  return std::to_string(v);
}

using Settings = std::vector<std::pair<std::string, std::string>>;

/// `key = value` lines; the block is itself a valid --config file.
std::string banner(std::string_view command, const Settings& settings) {
  std::string s = "# effective config: stlstm " + std::string(command) + "\n";
  for (const auto& [k, v] : settings) s += k + " = " + v + "\n";
  return s;
}

Settings spec_settings(const ModelSpec& spec) {
  return {{"kind", std::string(to_string(spec.kind))},
          {"locations", num(spec.locations)},
          {"vars", num(spec.vars)},
          {"n1", num(spec.n1)},
          {"n2", num(spec.n2)},
          {"activation", std::string(to_string(spec.activation))},
          {"seq_len", num(spec.seq_len)},
          {"horizon", num(spec.horizon)}};
}

Settings config_settings(const TrainConfig& c) {
  Settings s = {{"learning_rate", num(c.learning_rate)},
                {"epochs", num(c.epochs)},
                {"batch_size", num(c.batch_size)},
                {"l2_lambda", num(c.l2_lambda)},
                {"optimizer", std::string(to_string(c.optimizer))},
                {"beta1", num(c.beta1)},
                {"beta2", num(c.beta2)},
                {"epsilon", num(c.epsilon)},
                {"seed", num(c.seed)},
                {"repeats", num(c.repeats)},
                {"forget_bias_init", c.forget_bias_init ? "true" : "false"},
                {"holdout", c.holdout ? "true" : "false"}};
  return s;
}

void append(Settings& to, const Settings& from) { to.insert(to.end(), from.begin(), from.end()); }

std::size_t repeat_threads() {
  std::size_t n = std::max(1u, std::thread::hardware_concurrency());
  if (const char* env = std::getenv("STLSTM_THREADS"); env && *env) {
    std::size_t cap = 0;
    const std::string_view s(env);
    auto [ptr, ec] = std::from_chars(s.data(), s.data() + s.size(), cap);
    if (ec != std::errc() || ptr != s.data() + s.size() || cap == 0) {
      throw InvalidArgument("STLSTM_THREADS must be a positive integer, got '" + std::string(s) + "'");
    }
    n = std::min(n, cap);
  }
  return n;
}

void write_text(const fs::path& path, const std::string& text) {
  std::ofstream f(path, std::ios::binary | std::ios::trunc);
  if (!f) throw InvalidArgument("cannot write " + path.string());
  f << text;
  if (!f) throw InvalidArgument("write failed for " + path.string());
}

struct SpecArgs {
  ModelSpec spec;
  std::string kind = "stacked";
  std::string activation = "tanh";

  void add(CLI::App* app, bool dims) {
    app->add_option("--kind,--model-kind,--model_kind", kind, "stacked or st_stacked")
        ->capture_default_str();
    app->add_option("--activation,--inner-activation,--inner_activation", activation,
                    "inner activation: tanh or sigmoid")
        ->capture_default_str();
    if (dims) {
      app->add_option("--locations", spec.locations, "number of locations c")->capture_default_str();
      app->add_option("--vars", spec.vars, "variables per location m")->capture_default_str();
    }
    app->add_option("--n1", spec.n1, "total layer-1 neurons")->capture_default_str();
    app->add_option("--n2", spec.n2, "layer-2 neurons")->capture_default_str();
  }

  void add_sequence(CLI::App* app) {
    app->add_option("--seq_len,--seq-len", spec.seq_len, "input days T")->capture_default_str();
    app->add_option("--horizon", spec.horizon, "days ahead q")->capture_default_str();
  }

  ModelSpec resolve() {
    spec.kind = parse_model_kind(kind);
    spec.activation = parse_activation(activation);
    return spec;
  }
};

struct DataArgs {
  std::string manifest;
  std::string missing = "error";

  void add(CLI::App* app) {
    app->add_option("--manifest", manifest, "manifest listing location CSVs")->required();
    app->add_option("--missing", missing, "missing value policy: error or ffill")
        ->capture_default_str();
  }

  Dataset load(Manifest* out = nullptr) const {
    const Manifest m = load_manifest(manifest);
    if (out) *out = m;
    return load_dataset(m, parse_missing_policy(missing));
  }
};

std::string target_name(const Dataset& ds) {
  const std::size_t vars = ds.variables.size();
  return ds.locations[ds.target_column / vars] + ":" + ds.variables[ds.target_column % vars];
}

void check_compatible(const ModelSpec& spec, const Dataset& ds) {
  if (spec.locations != ds.locations.size() || spec.vars != ds.variables.size()) {
    throw InvalidArgument("model expects " + num(spec.locations) + " locations x " +
                          num(spec.vars) + " variables; data has " + num(ds.locations.size()) +
                          " x " + num(ds.variables.size()));
  }
}

std::vector<Window> windows_or_fail(const Dataset& ds, const ColumnStats& stats,
                                    const ModelSpec& spec, const DayRange& range,
                                    std::string_view what) {
  auto w = make_windows(ds, stats, spec.seq_len, spec.horizon, range);
  if (w.empty()) {
    throw RangeTooShortError("range too short: " + std::string(what) + " has " +
                             num(range.length()) + " days, need at least " +
                             num(spec.seq_len + spec.horizon) + " (seq_len + horizon)");
  }
  return w;
}

// gen-synthetic ---------------------------------------------------------

struct GenArgs {
  SyntheticConfig cfg;
  std::string out;
};

void add_gen(CLI::App& app, GenArgs& a, std::function<void()>& action, std::ostream& os) {
  auto* sub = app.add_subcommand("gen-synthetic", "write coupled AR synthetic CSVs and a manifest");
  auto& c = a.cfg;
  sub->add_option("--locations", c.locations, "number of locations")->capture_default_str();
  sub->add_option("--vars", c.vars, "variables per location")->capture_default_str();
  sub->add_option("--days", c.days, "days to generate (>= 50)")->capture_default_str();
  sub->add_option("--coupling", c.coupling, "cross-location coupling in [0, 1]")->capture_default_str();
  sub->add_option("--seed", c.seed, "generator seed")->capture_default_str();
  sub->add_option("--ar", c.ar, "autoregressive coefficient")->capture_default_str();
  sub->add_option("--noise", c.noise, "latent innovation std")->capture_default_str();
  sub->add_option("--obs_noise,--obs-noise", c.obs_noise, "observation noise std")
      ->capture_default_str();
  sub->add_option("--burn_in,--burn-in", c.burn_in, "discarded warm-up days")->capture_default_str();
  sub->add_option("--test_fraction,--test-fraction", c.test_fraction,
                  "trailing share of days marked as test range")
      ->capture_default_str();
  sub->add_option("--start_date,--start-date", c.start_date, "first date")->capture_default_str();
  sub->add_option("--out", a.out, "output directory")->required();
  sub->callback([&] {
    action = [&] {
      c.validate();
      os << banner("gen-synthetic",
                   {{"locations", num(c.locations)},
                    {"vars", num(c.vars)},
                    {"days", num(c.days)},
                    {"coupling", num(c.coupling)},
                    {"seed", num(c.seed)},
                    {"ar", num(c.ar)},
                    {"noise", num(c.noise)},
                    {"obs_noise", num(c.obs_noise)},
                    {"burn_in", num(c.burn_in)},
                    {"test_fraction", num(c.test_fraction)},
                    {"start_date", c.start_date},
                    {"out", a.out}});
      const SyntheticData data = generate_synthetic(c);
      const fs::path manifest = write_synthetic(data, a.out);
      os << "wrote " << data.locations.size() << " CSVs and " << manifest.string() << "\n";
    };
  });
}

// train -------------------------------------------------------------------

struct TrainArgs {
  SpecArgs spec;
  DataArgs data;
  TrainConfig cfg;
  std::string optimizer = "adam";
  std::string out;
  std::string config;
};

/// Applies `key = value` items from path to options not given on the command
/// line. Keys are option names without the leading dashes.
void apply_config(CLI::App* app, const std::string& path) {
  if (!fs::is_regular_file(path)) throw InvalidArgument("config file not found: " + path);
  const std::vector<CLI::ConfigItem> items = CLI::ConfigTOML().from_file(path);
  for (const CLI::ConfigItem& item : items) {
    if (item.name == "++" || item.name == "--") continue;  // section markers
    if (!item.parents.empty()) {
      throw InvalidArgument(path + ": sections are not supported ('" + item.fullname() + "')");
    }
    CLI::Option* opt = app->get_option_no_throw("--" + item.name);
    if (opt == nullptr || item.name == "config") {
      throw InvalidArgument(path + ": unknown key '" + item.name + "'");
    }
    if (opt->count() > 0) continue;
    for (const std::string& v : item.inputs) opt->add_result(v);
    opt->run_callback();
  }
}

std::string run_log(const std::string& head, const RepeatedResult& res,
                    const std::vector<std::string>& files) {
  std::ostringstream log;
  log << head;
  log << "repeat,seed,checkpoint,first_loss,final_loss,test_mae,test_mse\n";
  for (std::size_t r = 0; r < res.runs.size(); ++r) {
    const RunResult& run = res.runs[r];
    log << r << ',' << run.seed << ',' << files[r] << ',' << num(run.loss_curve.front()) << ','
        << num(run.loss_curve.back()) << ',' << (run.test_mae ? num(*run.test_mae) : "") << ','
        << (run.test_mse ? num(*run.test_mse) : "") << '\n';
  }
  if (res.median_mae) log << "median_mae = " << num(*res.median_mae) << '\n';
  if (res.median_mse) log << "median_mse = " << num(*res.median_mse) << '\n';
  log << "best_by_median = " << files[res.median_run] << '\n';
  for (std::size_t r = 0; r < res.runs.size(); ++r) {
    log << "loss_curve." << r << " =";
    for (double v : res.runs[r].loss_curve) log << ' ' << num(v);
    log << '\n';
    if (!res.runs[r].holdout_curve.empty()) {
      log << "holdout_curve." << r << " =";
      for (double v : res.runs[r].holdout_curve) log << ' ' << num(v);
      log << '\n';
    }
  }
  return log.str();
}

void add_train(CLI::App& app, TrainArgs& a, std::function<void()>& action, std::ostream& os,
               std::ostream& es) {
  auto* sub = app.add_subcommand("train", "train repeated models on a manifest");
  sub->add_option("--config", a.config, "key = value file; flags override it");
  a.data.add(sub);
  a.spec.add(sub, true);
  a.spec.add_sequence(sub);
  auto& c = a.cfg;
  sub->add_option("--learning_rate,--learning-rate", c.learning_rate)->capture_default_str();
  sub->add_option("--epochs", c.epochs)->capture_default_str();
  sub->add_option("--batch_size,--batch-size", c.batch_size)->capture_default_str();
  sub->add_option("--l2_lambda,--l2-lambda", c.l2_lambda)->capture_default_str();
  sub->add_option("--optimizer", a.optimizer, "adam or sgd")->capture_default_str();
  sub->add_option("--beta1", c.beta1)->capture_default_str();
  sub->add_option("--beta2", c.beta2)->capture_default_str();
  sub->add_option("--epsilon", c.epsilon)->capture_default_str();
  sub->add_option("--seed", c.seed, "seed of repeat 0; repeat r uses seed + r")
      ->capture_default_str();
  sub->add_option("--repeats", c.repeats)->capture_default_str();
  sub->add_flag("--forget_bias_init,--forget-bias-init", c.forget_bias_init,
                "initialize forget-gate biases to 1");
  sub->add_flag("--holdout", c.holdout,
                "keep the parameters best on the last 10% of training windows");
  sub->add_option("--out", a.out, "output directory")->required();
  sub->callback([&, sub] {
    action = [&, sub] {
      if (!a.config.empty()) apply_config(sub, a.config);
      c.optimizer = parse_optimizer(a.optimizer);
      ModelSpec spec = a.spec.resolve();
      const Dataset ds = a.data.load();
      // Sizes come from the data; explicit values must agree with it.
      for (auto [key, given, actual] : {std::tuple{"locations", &spec.locations, ds.locations.size()},
                                        std::tuple{"vars", &spec.vars, ds.variables.size()}}) {
        if (sub->count(std::string("--") + key) > 0 && *given != actual) {
          throw InvalidArgument(std::string(key) + " = " + num(*given) + " but the data has " +
                                num(actual));
        }
        *given = actual;
      }
      spec.validate();
      c.validate();
      const std::size_t threads = std::min(repeat_threads(), c.repeats);

      Settings settings = {{"manifest", a.data.manifest}, {"missing", a.data.missing}};
      append(settings, spec_settings(spec));
      append(settings, config_settings(c));
      settings.emplace_back("out", a.out);
      const std::string head = banner("train", settings);
      os << head << "# repeat threads: " << threads << "\n";

      const ColumnStats stats = training_stats(ds);
      const auto train = windows_or_fail(ds, stats, spec, train_range(ds), "training range");
      std::vector<Window> test;
      if (ds.test_first) {
        const DayRange tr = test_range(ds);
        if (tr.length() >= spec.seq_len + spec.horizon) {
          test = make_windows(ds, stats, spec.seq_len, spec.horizon, tr);
        } else {
          es << "warning: test range too short for seq_len + horizon; skipping test scoring\n";
        }
      }
      os << "training on " << train.size() << " windows, scoring on " << test.size()
         << " test windows\n";

      const RepeatedResult res = train_repeated(spec, c, train, test, threads);

      fs::create_directories(a.out);
      std::vector<std::string> files;
      for (std::size_t r = 0; r < res.runs.size(); ++r) {
        files.push_back("repeat-" + num(r) + ".ckpt");
        save_checkpoint({spec, res.runs[r].params, stats}, fs::path(a.out) / files.back());
      }
      write_text(fs::path(a.out) / "best-by-median", files[res.median_run] + "\n");
      write_text(fs::path(a.out) / "run.log", run_log(head, res, files));

      for (std::size_t r = 0; r < res.runs.size(); ++r) {
        const RunResult& run = res.runs[r];
        os << "repeat " << r << " seed " << run.seed << " loss " << num(run.loss_curve.front())
           << " -> " << num(run.loss_curve.back());
        if (run.test_mae) os << " test_mae " << num(*run.test_mae) << " test_mse " << num(*run.test_mse);
        os << "\n";
      }
      if (res.median_mae) {
        os << "median_mae = " << num(*res.median_mae) << "\nmedian_mse = " << num(*res.median_mse)
           << "\n";
      }
      os << "best_by_median = " << files[res.median_run] << "\n";
    };
  });
}

// predict / evaluate --------------------------------------------------------

struct ApplyArgs {
  std::string model;
  DataArgs data;
  std::string range = "test";
  std::string out;
  std::string testset;
};

struct Applied {
  Checkpoint ckpt;
  Dataset ds;
  std::vector<Window> windows;
  std::vector<double> predictions;
};

Applied apply_model(const ApplyArgs& a) {
  Applied r;
  r.ckpt = load_checkpoint(a.model);
  r.ds = a.data.load();
  check_compatible(r.ckpt.spec, r.ds);
  const ColumnStats stats = r.ckpt.normalization ? *r.ckpt.normalization : training_stats(r.ds);
  const DayRange range = resolve_range(r.ds, a.range);
  r.windows = windows_or_fail(r.ds, stats, r.ckpt.spec, range, "range '" + a.range + "'");
  r.predictions = predict_windows(r.ckpt.spec, r.ckpt.params, r.windows);
  return r;
}

Settings apply_settings(const ApplyArgs& a, const ModelSpec& spec) {
  Settings s = {{"model", a.model},
                {"manifest", a.data.manifest},
                {"missing", a.data.missing},
                {"range", a.range}};
  append(s, spec_settings(spec));
  return s;
}

void add_apply_options(CLI::App* sub, ApplyArgs& a) {
  sub->add_option("--model", a.model, "checkpoint file")->required();
  a.data.add(sub);
  sub->add_option("--range", a.range, "train, test, all or START,END")->capture_default_str();
}

void add_predict(CLI::App& app, ApplyArgs& a, std::function<void()>& action, std::ostream& os) {
  auto* sub = app.add_subcommand("predict", "write predictions for every window in a range");
  add_apply_options(sub, a);
  sub->add_option("--out", a.out, "output CSV")->required();
  sub->callback([&] {
    action = [&] {
      const Applied r = apply_model(a);
      Settings s = apply_settings(a, r.ckpt.spec);
      s.emplace_back("out", a.out);
      os << banner("predict", s);
      std::string csv = "window_id,date,prediction\n";
      for (std::size_t i = 0; i < r.windows.size(); ++i) {
        csv += num(r.windows[i].window_id) + "," + format_date(r.ds.dates[r.windows[i].target_day]) +
               "," + num(r.predictions[i]) + "\n";
      }
      write_text(a.out, csv);
      os << "wrote " << r.windows.size() << " predictions to " << a.out << "\n";
    };
  });
}

void add_evaluate(CLI::App& app, ApplyArgs& a, std::function<void()>& action, std::ostream& os) {
  auto* sub = app.add_subcommand("evaluate", "score a checkpoint on a range (MAE, MSE)");
  add_apply_options(sub, a);
  sub->add_option("--testset", a.testset, "report label (defaults to the range)");
  sub->add_option("--out", a.out, "write the evaluation report here");
  sub->callback([&] {
    action = [&] {
      const Applied r = apply_model(a);
      std::string label = a.testset.empty() ? a.range : a.testset;
      std::replace(label.begin(), label.end(), ',', '_');
      Settings s = apply_settings(a, r.ckpt.spec);
      s.emplace_back("testset", label);
      if (!a.out.empty()) s.emplace_back("out", a.out);
      os << banner("evaluate", s);

      std::vector<std::size_t> ids;
      std::vector<double> truths;
      for (const Window& w : r.windows) {
        ids.push_back(w.window_id);
        truths.push_back(w.target);
      }
      const EvalReport report =
          make_report(label, r.ckpt.spec, target_name(r.ds), ids, r.predictions, truths);
      os << "windows = " << report.n_windows() << "\nmae = " << num(report.mae)
         << "\nmse = " << num(report.mse) << "\n";
      if (!a.out.empty()) save_report(report, a.out);
    };
  });
}

// compare -------------------------------------------------------------------

struct CompareArgs {
  std::vector<std::string> reports;
  std::string csv;
};

void add_compare(CLI::App& app, CompareArgs& a, std::function<void()>& action, std::ostream& os) {
  auto* sub = app.add_subcommand("compare", "merge evaluation reports into a comparison table");
  sub->add_option("--reports,reports", a.reports, "evaluation report files")->required();
  sub->add_option("--csv", a.csv, "also write the table as CSV");
  sub->callback([&] {
    action = [&] {
      std::vector<EvalReport> reports;
      for (const auto& p : a.reports) reports.push_back(load_report(p));
      const ComparisonTable table = comparison_report(reports);
      os << table.to_text();
      if (!a.csv.empty()) write_text(a.csv, table.to_csv());
    };
  });
}

// gradcheck / param-count -----------------------------------------------------

struct GradArgs {
  SpecArgs spec;
  GradcheckOptions opts;
  std::uint64_t seed = 1;
};

void add_gradcheck(CLI::App& app, GradArgs& a, std::function<void()>& action, std::ostream& os) {
  auto* sub = app.add_subcommand("gradcheck", "compare analytic and finite-difference gradients");
  a.spec.spec.locations = 2;
  a.spec.spec.vars = 3;
  a.spec.spec.n1 = 8;
  a.spec.spec.n2 = 4;
  a.spec.spec.seq_len = 5;
  a.spec.add(sub, true);
  sub->add_option("--seq_len,--seq-len", a.spec.spec.seq_len, "input days T")->capture_default_str();
  sub->add_option("--seed", a.seed)->capture_default_str();
  sub->add_option("--windows", a.opts.windows, "random windows in the batch")->capture_default_str();
  sub->add_option("--l2_lambda,--l2-lambda,--lambda", a.opts.lambda)->capture_default_str();
  sub->add_option("--step", a.opts.step, "central difference step")->capture_default_str();
  sub->add_option("--tolerance", a.opts.tolerance, "max relative error")->capture_default_str();
  sub->callback([&] {
    action = [&] {
      const ModelSpec spec = a.spec.resolve();
      spec.validate();
      if (!(a.opts.step > 0.0) || !(a.opts.tolerance > 0.0) || a.opts.windows < 1) {
        throw InvalidArgument("step and tolerance must be > 0 and windows >= 1");
      }
      Settings s = spec_settings(spec);
      s.erase(s.end() - 1);  // horizon plays no part
      append(s, {{"seed", num(a.seed)},
                 {"windows", num(a.opts.windows)},
                 {"l2_lambda", num(a.opts.lambda)},
                 {"step", num(a.opts.step)},
                 {"tolerance", num(a.opts.tolerance)}});
      os << banner("gradcheck", s);
      const GradcheckReport rep = gradcheck(spec, a.seed, a.opts);
      os << "checked = " << rep.checked << "\nmax_rel_err = " << num(rep.max_rel_err)
         << "\nworst_param = " << rep.worst_param << " (analytic " << num(rep.worst_analytic)
         << ", numeric " << num(rep.worst_numeric) << ")\n";
      if (!rep.passed(a.opts.tolerance)) {
        os << "FAIL: max_rel_err >= " << num(a.opts.tolerance) << " at " << rep.worst_param << "\n";
        throw VerificationFailed{};
      }
      os << "PASS\n";
    };
  });
}

void add_param_count(CLI::App& app, SpecArgs& a, std::function<void()>& action, std::ostream& os) {
  auto* sub = app.add_subcommand("param-count", "closed-form parameter counts");
  a.add(sub, true);
  sub->callback([&] {
    action = [&] {
      const ModelSpec spec = a.resolve();
      spec.validate();
      Settings s = spec_settings(spec);
      s.resize(6);  // sequence settings do not affect the count
      os << banner("param-count", s);
      const ParamCount pc = param_count(spec);
      os << "layer1 = " << pc.layer1 << "\nlayer2 = " << pc.layer2 << "\nhead = " << pc.head
         << "\ntotal = " << pc.total << "\n";
    };
  });
}

}  // namespace

int run(int argc, const char* const* argv, std::ostream& out, std::ostream& err) {
  CLI::App app("Stacked and spatio-temporal stacked LSTM forecasting", "stlstm");
  app.require_subcommand(1);
  app.allow_extras(false);

  std::function<void()> action;
  GenArgs gen;
  TrainArgs train;
  ApplyArgs predict, evaluate;
  CompareArgs compare;
  GradArgs grad;
  SpecArgs count;
  add_gen(app, gen, action, out);
  add_train(app, train, action, out, err);
  add_predict(app, predict, action, out);
  add_evaluate(app, evaluate, action, out);
  add_compare(app, compare, action, out);
  add_gradcheck(app, grad, action, out);
  add_param_count(app, count, action, out);

  try {
    app.parse(argc, argv);
  } catch (const CLI::ParseError& e) {
    const int code = app.exit(e, out, err);
    return code == 0 ? kOk : kUsage;
  }

  try {
    if (action) action();
    return kOk;
  } catch (const VerificationFailed&) {
    return kVerification;
  } catch (const DivergenceError& e) {
    err << "error: " << e.what() << "\n";
    return kDivergence;
  } catch (const Error& e) {
    err << "error: " << e.what() << "\n";
    return kUsage;
  } catch (const fs::filesystem_error& e) {
    err << "error: " << e.what() << "\n";
    return kUsage;
  } catch (const std::exception& e) {
    err << "internal error: " << e.what() << "\n";
    return kInternal;
  }
}

}  // namespace stlstm::cli

#include "commands.hpp"

#include <algorithm>
#include <cmath>
#include <filesystem>
#include <iomanip>
#include <memory>
#include <ostream>
#include <sstream>

#include "json.hpp"

#include "gnnqec/errors.hpp"
#include "gnnqec/hwsim.hpp"
#include "gnnqec/model.hpp"
#include "gnnqec/prune.hpp"
#include "gnnqec/quant.hpp"
#include "gnnqec/syndrome.hpp"
#include "gnnqec/text.hpp"

namespace gnnqec::cli {

namespace {

using ojson = nlohmann::ordered_json;

bool is_preset_name(const std::string& s) {
  return s == "unpruned" || s == "max-time" || s == "mean-time" || s == "max-time-optimized" ||
         s == "mean-time-optimized";
}

model::ModelConfig config_arg(Context& ctx, const std::string& spec) {
  if (is_preset_name(spec)) return model::preset_config(spec);
  ctx.input(spec);
  return model::load_model(spec).config;
}

model::Model model_arg(Context& ctx, const std::string& path) {
  ctx.input(path);
  return model::load_model(path);
}

quant::QuantizedModel qmodel_arg(Context& ctx, const std::string& path) {
  ctx.input(path);
  return quant::load_quantized(path);
}

std::vector<syndrome::SyndromeGraph> graphs_arg(Context& ctx, const std::string& path) {
  ctx.input(path);
  return syndrome::read_graph_batch(path);
}

hwsim::HardwareConfig hw_arg(Context& ctx, const std::string& spec, const model::ModelConfig& config,
                             int n_max) {
  hwsim::HardwareConfig hw;
  if (spec.empty()) {
    hw = hwsim::HardwareConfig::preset(config.variant == model::Variant::MeanTime ? "mean-time" : "max-time");
  } else if (spec == "max-time" || spec == "mean-time") {
    hw = hwsim::HardwareConfig::preset(spec);
  } else {
    ctx.input(spec);
    hw = hwsim::hardware_from_json(text::read_file(spec));
  }
  if (n_max > 0) hw.n_max = n_max;
  hw.validate();
  return hw;
}

void write_output(Context& ctx, const std::string& path, std::string_view contents) {
  text::write_file(path, contents);
  ctx.output(path);
}

std::string error_report_json(const quant::QuantizationErrorReport& r) {
  ojson j;
  j["format"] = "gnnqec-quantization-error";
  j["mode"] = quant::to_string(r.mode);
  j["weights"] = r.weight_format;
  j["activations"] = r.activation_format;
  j["biases"] = r.bias_format;
  j["graphs"] = r.graphs;
  auto layers = ojson::array();
  for (const auto& l : r.layers) {
    layers.push_back({{"label", l.label},
                      {"max_abs_error", l.max_abs_error},
                      {"mean_abs_error", l.mean_abs_error},
                      {"max_bound", l.max_bound},
                      {"bound_violations", l.bound_violations}});
  }
  j["layers"] = std::move(layers);
  j["max_pre_activation_error"] = r.max_pre_activation_error;
  j["decision_flips"] = r.decision_flips;
  j["unexplained_flips"] = r.unexplained_flips;
  return j.dump(2) + "\n";
}

// --- sample ------------------------------------------------------------------

void add_sample(CLI::App& app, std::vector<Command>& commands) {
  struct Opts {
    int d = 7;
    double p = 0.001;
    std::size_t count = 1000;
    int rounds = 0;
    int k = syndrome::kDefaultNeighbors;
    std::uint64_t seed = 1;
    std::string out;
    std::string labels;
  };
  auto o = std::make_shared<Opts>();
  auto* sub = app.add_subcommand("sample", "Sample syndrome graphs under phenomenological noise");
  sub->add_option("--d", o->d, "Code distance (odd, >= 3)")->capture_default_str();
  sub->add_option("--p", o->p, "Physical error probability")->capture_default_str();
  sub->add_option("--count", o->count, "Number of graphs")->capture_default_str();
  sub->add_option("--rounds", o->rounds, "Measurement rounds (0 = distance)")->capture_default_str();
  sub->add_option("--k", o->k, "Nearest neighbours per node")->capture_default_str();
  sub->add_option("--seed", o->seed, "Base seed")->capture_default_str();
  sub->add_option("--out", o->out, "Graph batch (JSON lines)")->required();
  sub->add_option("--labels", o->labels, "Label file (default <out>.labels)");
  commands.push_back({sub, [o](Context& ctx) {
    ctx.seed = o->seed;
    const syndrome::CodeLayout layout(o->d, o->rounds);
    const auto batch = syndrome::sample_batch(layout, o->p, o->count, o->seed, o->k);
    syndrome::write_graph_batch(o->out, batch.graphs);
    ctx.output(o->out);
    const auto labels = o->labels.empty() ? o->out + ".labels" : o->labels;
    syndrome::write_labels(labels, batch.labels);
    ctx.output(labels);
    std::size_t nodes = 0;
    for (const auto& g : batch.graphs) nodes += g.node_count();
    ctx.out << "sampled " << batch.graphs.size() << " graphs, " << nodes << " nodes\n";
  }});
}

// --- init ---------------------------------------------------------------------

void add_init(CLI::App& app, std::vector<Command>& commands) {
  struct Opts {
    std::string model = "max-time";
    std::uint64_t seed = 1;
    double scale = 0.25;
    double bias_scale = 0.1;
    std::string out;
  };
  auto o = std::make_shared<Opts>();
  auto* sub = app.add_subcommand("init", "Write a preset model with random weights");
  sub->add_option("--model", o->model, "unpruned, max-time or mean-time")->capture_default_str();
  sub->add_option("--seed", o->seed, "Weight seed")->capture_default_str();
  sub->add_option("--scale", o->scale, "Weights uniform in [-scale, scale]")->capture_default_str();
  sub->add_option("--bias-scale", o->bias_scale, "Biases uniform in [-s, s]")->capture_default_str();
  sub->add_option("--out", o->out, "Model file")->required();
  commands.push_back({sub, [o](Context& ctx) {
    ctx.seed = o->seed;
    if (!is_preset_name(o->model)) throw DomainError("init needs a preset name, got '" + o->model + "'");
    model::Model m;
    m.config = model::preset_config(o->model);
    m.weights = model::random_weights(m.config, o->seed, o->scale, o->bias_scale);
    model::save_model(o->out, m);
    ctx.output(o->out);
    ctx.out << "wrote " << model::to_string(m.config.variant) << " model with "
            << model::parameter_count(m.config).total << " parameters\n";
  }});
}

// --- infer --------------------------------------------------------------------

void add_infer(CLI::App& app, std::vector<Command>& commands) {
  struct Opts {
    std::string model;
    std::string qmodel;
    std::string graphs;
    std::string out;
  };
  auto o = std::make_shared<Opts>();
  auto* sub = app.add_subcommand("infer", "Run float or fixed-point inference on a graph batch");
  auto* m = sub->add_option("--model", o->model, "Float model file");
  auto* q = sub->add_option("--qmodel", o->qmodel, "Quantized model file");
  m->excludes(q);
  sub->add_option("--graphs", o->graphs, "Graph batch")->required();
  sub->add_option("--out", o->out, "Per-graph results (JSON lines)")->required();
  commands.push_back({sub, [o](Context& ctx) {
    if (o->model.empty() == o->qmodel.empty()) throw DomainError("infer needs exactly one of --model or --qmodel");
    const auto graphs = graphs_arg(ctx, o->graphs);
    std::string lines;
    std::optional<model::Model> fm;
    std::optional<quant::QuantizedModel> qm;
    if (!o->model.empty()) {
      fm = model_arg(ctx, o->model);
    } else {
      qm = qmodel_arg(ctx, o->qmodel);
    }
    for (std::size_t i = 0; i < graphs.size(); ++i) {
      const auto& g = graphs[i];
      ojson j;
      j["index"] = i;
      j["n"] = g.node_count();
      if (g.node_count() == 0) {
        j["status"] = "short-circuit";
        j["decision"] = 0;
      } else if (fm) {
        const auto t = model::infer_float(fm->config, fm->weights, g);
        j["status"] = "ok";
        j["pre_activation"] = t.pre_activation;
        j["probability"] = t.probability;
        j["decision"] = t.pre_activation >= 0.0 ? 1 : 0;
      } else if (g.node_count() > static_cast<std::size_t>(qm->n_max())) {
        j["status"] = "rejected";
      } else {
        const auto t = qm->infer(g, false);
        j["status"] = "ok";
        j["pre_activation_code"] = t.pre_activation;
        j["pre_activation"] = std::ldexp(static_cast<double>(t.pre_activation), -t.pre_fraction_bits);
        j["decision"] = t.decision ? 1 : 0;
      }
      lines += j.dump();
      lines += '\n';
    }
    write_output(ctx, o->out, lines);
    ctx.out << "inferred " << graphs.size() << " graphs\n";
  }});
}

// --- quantize -----------------------------------------------------------------

void add_quantize(CLI::App& app, std::vector<Command>& commands) {
  struct Opts {
    std::string model;
    std::string scheme = "max-time";
    std::string weights;
    std::string activations;
    std::string biases;
    int accumulator_bits = 0;
    int n_max = 168;
    std::string out;
    std::string graphs;
    std::string report;
    std::string mode = "full";
  };
  auto o = std::make_shared<Opts>();
  auto* sub = app.add_subcommand("quantize", "Quantize a float model to fixed point");
  sub->add_option("--model", o->model, "Float model file")->required();
  sub->add_option("--scheme", o->scheme, "max-time or mean-time")->capture_default_str();
  sub->add_option("--weights", o->weights, "Override the weight format, e.g. Q4.10");
  sub->add_option("--activations", o->activations, "Override the activation format");
  sub->add_option("--biases", o->biases, "Override the bias format");
  sub->add_option("--accumulator-bits", o->accumulator_bits, "Override the accumulator width (0 = scheme)")
      ->capture_default_str();
  sub->add_option("--n-max", o->n_max, "Largest graph covered by the factor table")->capture_default_str();
  sub->add_option("--out", o->out, "Quantized model file")->required();
  sub->add_option("--graphs", o->graphs, "Graph batch for an error report");
  sub->add_option("--report", o->report, "Error report file (default <out>.error.json)");
  sub->add_option("--mode", o->mode, "full, weights-only, activations-only or biases-only")->capture_default_str();
  commands.push_back({sub, [o](Context& ctx) {
    const auto m = model_arg(ctx, o->model);
    auto scheme = quant::QuantizationScheme::preset(o->scheme);
    if (!o->weights.empty()) scheme.weights = quant::FixedPointFormat::parse(o->weights);
    if (!o->activations.empty()) scheme.activations = quant::FixedPointFormat::parse(o->activations);
    if (!o->biases.empty()) scheme.biases = quant::FixedPointFormat::parse(o->biases);
    if (o->accumulator_bits > 0) scheme.accumulator_bits = o->accumulator_bits;
    if (!o->weights.empty() || !o->activations.empty() || !o->biases.empty()) scheme.name = "custom";
    const auto mode = quant::parse_quant_mode(o->mode);
    const auto qm = quant::quantize_model(m, scheme, o->n_max);
    quant::save_quantized(o->out, qm);
    ctx.output(o->out);
    ctx.out << "quantized with W " << scheme.weights.to_string() << ", A " << scheme.activations.to_string()
            << ", B " << scheme.biases.to_string() << "; accumulator needs "
            << qm.required_accumulator_bits() << " of " << scheme.accumulator_bits << " bits\n";
    if (!o->graphs.empty()) {
      const auto graphs = graphs_arg(ctx, o->graphs);
      const auto r = quant::quantization_error_report(qm, graphs, mode);
      write_output(ctx, o->report.empty() ? o->out + ".error.json" : o->report, error_report_json(r));
      ctx.out << "decision flips " << r.decision_flips << ", unexplained " << r.unexplained_flips << '\n';
    }
  }});
}

// --- profile ------------------------------------------------------------------

void add_profile(CLI::App& app, std::vector<Command>& commands) {
  struct Opts {
    std::string model;
    std::string graphs;
    double theta = 0.8;
    std::string out;
  };
  auto o = std::make_shared<Opts>();
  auto* sub = app.add_subcommand("profile", "Measure GraphConv activation sparsity");
  sub->add_option("--model", o->model, "Float model file")->required();
  sub->add_option("--graphs", o->graphs, "Graph batch")->required();
  sub->add_option("--theta", o->theta, "Sparse-feature threshold")->capture_default_str();
  sub->add_option("--out", o->out, "Sparsity profile")->required();
  commands.push_back({sub, [o](Context& ctx) {
    const auto m = model_arg(ctx, o->model);
    const auto graphs = graphs_arg(ctx, o->graphs);
    const auto profile = prune::profile_sparsity(m, graphs, o->theta);
    write_output(ctx, o->out, prune::profile_to_json(profile));
    for (const auto& a : prune::avoidable_multiplications(profile, m.config, 1)) {
      ctx.out << a.label << " sparse " << a.sparse_features << " avoidable " << a.per_node << "xn\n";
    }
  }});
}

// --- prune --------------------------------------------------------------------

void add_prune(CLI::App& app, std::vector<Command>& commands) {
  struct Opts {
    std::string model;
    std::string plan;
    int auto_top = -1;
    std::string profile;
    std::string graphs;
    double theta = 0.8;
    double mask_fraction = 0.0;
    std::string out;
    std::string plan_out;
  };
  auto o = std::make_shared<Opts>();
  auto* sub = app.add_subcommand("prune", "Apply a pruning plan or derive one from sparsity");
  sub->add_option("--model", o->model, "Float model file")->required();
  auto* plan = sub->add_option("--plan", o->plan, "Pruning plan file");
  auto* top = sub->add_option("--auto-top", o->auto_top, "Remove the K highest-ranked layers");
  plan->excludes(top);
  sub->add_option("--profile", o->profile, "Sparsity profile for --auto-top");
  sub->add_option("--graphs", o->graphs, "Graph batch to profile for --auto-top");
  sub->add_option("--theta", o->theta, "Threshold when profiling")->capture_default_str();
  sub->add_option("--mask-fraction", o->mask_fraction, "Fraction of the next layer's features to mask")
      ->capture_default_str();
  sub->add_option("--out", o->out, "Pruned model file")->required();
  sub->add_option("--plan-out", o->plan_out, "Where to write the applied plan (default <out>.plan.json)");
  commands.push_back({sub, [o](Context& ctx) {
    const auto m = model_arg(ctx, o->model);
    prune::PruningPlan plan;
    if (!o->plan.empty()) {
      ctx.input(o->plan);
      plan = prune::plan_from_json(text::read_file(o->plan));
      prune::compute_savings(plan, m.config);
    } else if (o->auto_top >= 0) {
      prune::SparsityProfile profile;
      if (!o->profile.empty()) {
        ctx.input(o->profile);
        profile = prune::profile_from_json(text::read_file(o->profile));
      } else if (!o->graphs.empty()) {
        profile = prune::profile_sparsity(m, graphs_arg(ctx, o->graphs), o->theta);
      } else {
        throw DomainError("--auto-top needs --profile or --graphs");
      }
      plan = prune::auto_plan(profile, m.config, o->auto_top, o->mask_fraction);
    } else {
      throw DomainError("prune needs --plan or --auto-top");
    }
    const auto pruned = prune::apply_pruning(m, plan);
    model::save_model(o->out, pruned);
    ctx.output(o->out);
    write_output(ctx, o->plan_out.empty() ? o->out + ".plan.json" : o->plan_out,
                 prune::plan_to_json(plan, m.config));
    ctx.out << "pruned model: " << model::parameter_count(pruned.config).total << " parameters ("
            << plan.parameters_saved << " removed)\n";
  }});
}

// --- schedule -----------------------------------------------------------------

void add_schedule(CLI::App& app, std::vector<Command>& commands) {
  struct Opts {
    std::string model = "max-time";
    int n = 30;
    std::string hw;
    int n_max = 0;
    std::string out;
    std::string format = "json";
  };
  auto o = std::make_shared<Opts>();
  auto* sub = app.add_subcommand("schedule", "Cycle schedule of one inference");
  sub->add_option("--model", o->model, "Preset name or model file")->capture_default_str();
  sub->add_option("--n", o->n, "Graph node count")->capture_default_str();
  sub->add_option("--hw", o->hw, "Hardware preset or config file (default matches the model)");
  sub->add_option("--n-max", o->n_max, "Override the node filter (0 = hardware default)")->capture_default_str();
  sub->add_option("--out", o->out, "Schedule report");
  sub->add_option("--format", o->format, "json or csv")->check(CLI::IsMember({"json", "csv"}))->capture_default_str();
  commands.push_back({sub, [o](Context& ctx) {
    const auto config = config_arg(ctx, o->model);
    const auto hw = hw_arg(ctx, o->hw, config, o->n_max);
    const auto r = hwsim::schedule(config, o->n, hw);
    for (const auto& l : r.layers) ctx.out << std::left << std::setw(12) << l.label << ' ' << l.cycles << '\n';
    ctx.out << std::left << std::setw(12) << "total" << ' ' << r.total_cycles << '\n';
    ctx.out << std::left << std::setw(12) << "latency_ns" << ' ' << text::format_double(r.latency_ns) << '\n';
    if (!o->out.empty()) write_output(ctx, o->out, o->format == "csv" ? r.to_csv() : r.to_json());
  }});
}

// --- bram-plan ----------------------------------------------------------------

void add_bram_plan(CLI::App& app, std::vector<Command>& commands) {
  struct Opts {
    std::string qmodel;
    std::string model;
    int weight_bits = 14;
    std::string hw;
    std::string out;
  };
  auto o = std::make_shared<Opts>();
  auto* sub = app.add_subcommand("bram-plan", "Pack weights into BRAM words");
  auto* q = sub->add_option("--qmodel", o->qmodel, "Quantized model file");
  auto* m = sub->add_option("--model", o->model, "Preset name or model file (default max-time)");
  q->excludes(m);
  sub->add_option("--weight-bits", o->weight_bits, "Weight width without --qmodel")->capture_default_str();
  sub->add_option("--hw", o->hw, "Hardware preset or config file");
  sub->add_option("--out", o->out, "Plan summary");
  commands.push_back({sub, [o](Context& ctx) {
    hwsim::BramPlan plan;
    model::ModelConfig config;
    int budget = 0;
    if (!o->qmodel.empty()) {
      const auto qm = qmodel_arg(ctx, o->qmodel);
      config = qm.config();
      const auto hw = hw_arg(ctx, o->hw, config, 0);
      plan = hwsim::bram_plan(qm, hw);
      budget = hw.dsp_budget;
    } else {
      config = config_arg(ctx, o->model.empty() ? "max-time" : o->model);
      const auto hw = hw_arg(ctx, o->hw, config, 0);
      plan = hwsim::bram_plan(config, o->weight_bits, hw.n_max, hw);
      budget = hw.dsp_budget;
    }
    const auto problems = plan.verify(config, budget);
    for (const auto& p : problems) ctx.out << "problem: " << p << '\n';
    ctx.out << "brams_used " << plan.brams_used << "\naddresses_used " << plan.addresses_used
            << "\nverified " << (problems.empty() ? "yes" : "no") << '\n';
    if (!o->out.empty()) write_output(ctx, o->out, plan.summary_json());
    if (!problems.empty()) throw ResourceError("BRAM plan failed verification");
  }});
}

// --- latency ------------------------------------------------------------------

std::vector<double> read_distribution(const std::string& path) {
  const auto text = text::read_file(path);
  try {
    const auto j = nlohmann::json::parse(text);
    if (j.is_array()) return j.get<std::vector<double>>();
    return j.at("distribution").get<std::vector<double>>();
  } catch (const nlohmann::json::exception& e) {
    throw MalformedFileError("distribution file must hold a JSON array of P(n): " + std::string(e.what()));
  }
}

void add_latency(CLI::App& app, std::vector<Command>& commands) {
  struct Opts {
    std::string model = "max-time";
    std::string hw;
    int n_max = 0;
    std::string dist;
    std::string graphs;
    std::string out;
  };
  auto o = std::make_shared<Opts>();
  auto* sub = app.add_subcommand("latency", "Latency curve over n and mean latency");
  sub->add_option("--model", o->model, "Preset name or model file")->capture_default_str();
  sub->add_option("--hw", o->hw, "Hardware preset or config file");
  sub->add_option("--n-max", o->n_max, "Override the node filter (0 = hardware default)")->capture_default_str();
  auto* d = sub->add_option("--dist", o->dist, "Node-count distribution (JSON array, P(n) from n = 0)");
  auto* g = sub->add_option("--graphs", o->graphs, "Graph batch to take the distribution from");
  d->excludes(g);
  sub->add_option("--out", o->out, "Latency curve CSV");
  commands.push_back({sub, [o](Context& ctx) {
    const auto config = config_arg(ctx, o->model);
    const auto hw = hw_arg(ctx, o->hw, config, o->n_max);
    const auto curve = hwsim::latency_curve(config, hw, 0, hw.n_max);
    if (!o->out.empty()) write_output(ctx, o->out, hwsim::latency_curve_csv(curve));
    ctx.out << "worst_case_ns " << text::format_double(curve.back().latency_ns) << '\n';
    std::vector<double> dist;
    if (!o->dist.empty()) {
      ctx.input(o->dist);
      dist = read_distribution(o->dist);
    } else if (!o->graphs.empty()) {
      dist = hwsim::node_distribution(graphs_arg(ctx, o->graphs), hw.n_max);
    }
    if (!dist.empty()) {
      ctx.out << "mean_latency_ns " << text::format_double(hwsim::mean_latency(config, hw, dist)) << '\n';
    }
  }});
}

// --- decode -------------------------------------------------------------------

void add_decode(CLI::App& app, std::vector<Command>& commands) {
  struct Opts {
    std::string qmodel;
    std::string graphs;
    std::string labels;
    std::string hw;
    int n_max = 0;
    std::string out;
  };
  auto o = std::make_shared<Opts>();
  auto* sub = app.add_subcommand("decode", "Filter, decode and time a graph batch");
  sub->add_option("--qmodel", o->qmodel, "Quantized model file")->required();
  sub->add_option("--graphs", o->graphs, "Graph batch")->required();
  sub->add_option("--labels", o->labels, "Ground-truth labels");
  sub->add_option("--hw", o->hw, "Hardware preset or config file");
  sub->add_option("--n-max", o->n_max, "Override the node filter (0 = hardware default)")->capture_default_str();
  sub->add_option("--out", o->out, "Decode report")->required();
  commands.push_back({sub, [o](Context& ctx) {
    const auto qm = qmodel_arg(ctx, o->qmodel);
    const auto hw = hw_arg(ctx, o->hw, qm.config(), o->n_max);
    const auto graphs = graphs_arg(ctx, o->graphs);
    std::vector<std::uint8_t> labels;
    std::optional<std::span<const std::uint8_t>> view;
    if (!o->labels.empty()) {
      ctx.input(o->labels);
      labels = syndrome::read_labels(o->labels);
      view = labels;
    }
    const auto r = hwsim::decode_pipeline(qm, hw, graphs, view);
    write_output(ctx, o->out, r.to_json());
    ctx.out << "graphs " << r.graphs << " accepted " << r.accepted << " rejected " << r.rejected
            << " short_circuited " << r.short_circuited << '\n';
    if (r.labeled) ctx.out << "logical_error_rate " << text::format_double(r.error_rate()) << '\n';
  }});
}

// --- report -------------------------------------------------------------------

std::string csv_cell(const nlohmann::json& v) {
  if (v.is_null()) return "";
  if (v.is_number_float()) return text::format_double(v.get<double>());
  if (v.is_string()) return v.get<std::string>();
  return v.dump();
}

void add_report(CLI::App& app, std::vector<Command>& commands) {
  struct Opts {
    std::vector<std::string> inputs;
    std::string out;
    std::string format = "csv";
  };
  auto o = std::make_shared<Opts>();
  auto* sub = app.add_subcommand("report", "Compare schedule or decode reports side by side");
  sub->add_option("--inputs", o->inputs, "Schedule or decode report files")->required()->expected(1, -1);
  sub->add_option("--out", o->out, "Comparison table");
  sub->add_option("--format", o->format, "csv or json")->check(CLI::IsMember({"csv", "json"}))->capture_default_str();
  commands.push_back({sub, [o](Context& ctx) {
    std::vector<nlohmann::json> docs;
    std::string schema;
    for (const auto& path : o->inputs) {
      ctx.input(path);
      auto j = nlohmann::json::parse(text::read_file(path), nullptr, false);
      if (j.is_discarded() || !j.is_object()) throw MalformedFileError(path + " is not a JSON report");
      const auto format = j.value("format", std::string());
      if (format != "gnnqec-schedule" && format != "gnnqec-decode-report") {
        throw DomainError(path + " is neither a schedule nor a decode report");
      }
      if (!schema.empty() && format != schema) throw DomainError("cannot compare " + schema + " with " + format);
      schema = format;
      docs.push_back(std::move(j));
    }
    std::vector<std::string> metrics;
    if (schema == "gnnqec-schedule") {
      metrics = {"model", "parameters", "n", "dsp_budget", "clock_ns"};
      std::vector<std::string> labels;
      for (const auto& d : docs) {
        for (const auto& l : d.at("layers")) {
          const auto label = l.at("label").get<std::string>();
          if (std::find(labels.begin(), labels.end(), label) == labels.end()) labels.push_back(label);
        }
      }
      for (auto& d : docs) {
        for (const auto& l : d.at("layers")) d[l.at("label").get<std::string>()] = l.at("cycles");
      }
      metrics.insert(metrics.end(), labels.begin(), labels.end());
      metrics.push_back("total_cycles");
      metrics.push_back("latency_ns");
    } else {
      metrics = {"n_max", "graphs", "accepted", "rejected", "short_circuited", "rejected_fraction",
                 "logical_error_rate", "mean_latency_ns"};
    }
    std::vector<std::string> names;
    for (const auto& path : o->inputs) names.push_back(std::filesystem::path(path).filename().string());

    std::string body;
    if (o->format == "json") {
      ojson j;
      j["format"] = "gnnqec-comparison";
      j["columns"] = names;
      auto rows = ojson::array();
      for (const auto& metric : metrics) {
        ojson row;
        row["metric"] = metric;
        auto values = ojson::array();
        for (const auto& d : docs) values.push_back(d.contains(metric) ? ojson(d.at(metric)) : ojson());
        row["values"] = std::move(values);
        rows.push_back(std::move(row));
      }
      j["rows"] = std::move(rows);
      body = j.dump(2) + "\n";
    } else {
      body = "metric";
      for (const auto& n : names) body += "," + n;
      body += "\n";
      for (const auto& metric : metrics) {
        body += metric;
        for (const auto& d : docs) body += "," + (d.contains(metric) ? csv_cell(d.at(metric)) : std::string());
        body += "\n";
      }
    }
    if (o->out.empty()) {
      ctx.out << body;
    } else {
      write_output(ctx, o->out, body);
    }
  }});
}

}  // namespace

void register_commands(CLI::App& app, std::vector<Command>& commands) {
  add_sample(app, commands);
  add_init(app, commands);
  add_infer(app, commands);
  add_quantize(app, commands);
  add_profile(app, commands);
  add_prune(app, commands);
  add_schedule(app, commands);
  add_bram_plan(app, commands);
  add_latency(app, commands);
  add_decode(app, commands);
  add_report(app, commands);
}

}  // namespace gnnqec::cli

// coherelab: command-line front end.
//
// Exit codes: 0 ok, 1 validate found violations, 2 usage, 3 data error,
// 4 internal numerics error.

#include <chrono>
#include <cstdio>
#include <cstdlib>
#include <ctime>
#include <filesystem>
#include <iostream>
#include <optional>
#include <string>
#include <vector>

#include <CLI11.hpp>
#include <json.hpp>

#include "coherelab/coherence.hpp"
#include "coherelab/error.hpp"
#include "coherelab/eval.hpp"
#include "coherelab/ingest.hpp"
#include "coherelab/io.hpp"
#include "coherelab/labeling.hpp"
#include "coherelab/synth.hpp"

namespace fs = std::filesystem;
using ordered_json = nlohmann::ordered_json;
using namespace coherelab;

namespace {

constexpr int kExitViolations = 1;
constexpr int kExitUsage = 2;
constexpr int kExitData = 3;
constexpr int kExitNumerics = 4;

struct Options {
  std::string transcripts;
  std::string self_reports;
  std::string predictions;
  std::string model;
  std::string save_model;
  std::string spec;
  std::string config_file;
  std::string source = "gold";
  std::string format = "table";
  std::string out_dir = ".";
  std::string train_command;
  std::string predict_command;
  double alpha = 0.05;
  double poms_max = 8.0;
  std::size_t min_sessions = 3;
  std::size_t k_folds = 10;
  double dev_fraction = 0.1;
  double balance_ratio = 0.5;
  std::uint64_t seed = 0;
  std::string seed_origin = "default";
  bool sequential = false;
};

// Flags beat the config file, which beats the environment, which beats defaults.
void resolve(Options& o, const CLI::App& cmd) {
  nlohmann::json config = nlohmann::json::object();
  if (!o.config_file.empty()) {
    try {
      config = nlohmann::json::parse(io::read_text_file(o.config_file));
    } catch (const nlohmann::json::exception& e) {
      throw Error(ErrorCode::SchemaViolation, "config " + o.config_file + ": " + e.what());
    }
    if (!config.is_object()) throw Error(ErrorCode::SchemaViolation, "config must be a JSON object");
  }
  auto from_config = [&](const char* flag, const char* key, auto& target) {
    if (cmd.get_option_no_throw(flag) && cmd.count(flag) > 0) return false;
    if (!config.contains(key)) return false;
    try {
      target = config[key].get<std::remove_reference_t<decltype(target)>>();
    } catch (const nlohmann::json::exception& e) {
      throw Error(ErrorCode::SchemaViolation, std::string("config field '") + key + "': " + e.what());
    }
    return true;
  };
  from_config("--source", "source", o.source);
  from_config("--format", "format", o.format);
  from_config("--alpha", "alpha", o.alpha);
  from_config("--poms-max", "poms_subscale_max", o.poms_max);
  from_config("--min-sessions", "min_sessions", o.min_sessions);
  from_config("--k-folds", "k_folds", o.k_folds);
  from_config("--dev-fraction", "dev_fraction", o.dev_fraction);
  from_config("--balance-ratio", "balance_ratio", o.balance_ratio);
  from_config("--train-command", "train_command", o.train_command);
  from_config("--predict-command", "predict_command", o.predict_command);

  if (cmd.get_option_no_throw("--seed") && cmd.count("--seed") > 0) {
    o.seed_origin = "flag";
  } else if (from_config("--seed", "seed", o.seed)) {
    o.seed_origin = "config";
  } else if (const char* env = std::getenv("COHERELAB_SEED"); env && *env) {
    try {
      std::size_t used = 0;
      o.seed = std::stoull(env, &used);
      if (used != std::string(env).size()) throw std::invalid_argument(env);
    } catch (const std::exception&) {
      throw Error(ErrorCode::InvalidArgument, std::string("COHERELAB_SEED is not an integer: ") + env);
    }
    o.seed_origin = "env";
  }
  if (o.source != "gold" && o.source != "external" && o.source != "baseline") {
    throw Error(ErrorCode::InvalidArgument, "source must be gold, external or baseline");
  }
  if (o.format != "json" && o.format != "table") {
    throw Error(ErrorCode::InvalidArgument, "format must be json or table");
  }
}

AnalysisConfig analysis_config(const Options& o) {
  AnalysisConfig c;
  c.alpha = o.alpha;
  c.poms_subscale_max = o.poms_max;
  c.min_sessions_per_client = o.min_sessions;
  c.check();
  return c;
}

std::string utc_timestamp() {
  const std::time_t now = std::chrono::system_clock::to_time_t(std::chrono::system_clock::now());
  std::tm tm{};
  gmtime_r(&now, &tm);
  char buf[32];
  std::strftime(buf, sizeof buf, "%Y-%m-%dT%H:%M:%SZ", &tm);
  return buf;
}

class Run {
 public:
  Run(std::string subcommand, const Options& o) : subcommand_(std::move(subcommand)), o_(o) {}

  void input(const std::vector<ingest::SourceFile>& files) {
    for (const auto& f : files) inputs_.push_back(f);
  }
  void input(const std::string& role, const std::string& path) {
    inputs_.push_back({role, path, io::sha256_hex(io::read_text_file(path))});
  }

  void output(const std::string& name, const std::string& content) {
    io::write_text_file(fs::path(o_.out_dir) / name, content);
    outputs_.push_back({name, io::sha256_hex(content)});
  }

  void finish(const ordered_json& config) {
    ordered_json m;
    m["tool"] = "coherelab";
    m["version"] = COHERELAB_VERSION;
    m["subcommand"] = subcommand_;
    m["timestamp"] = utc_timestamp();
    m["seed"] = o_.seed;
    m["seed_source"] = o_.seed_origin;
    m["config"] = config;
    ordered_json in = ordered_json::array();
    for (const auto& f : inputs_) in.push_back({{"role", f.role}, {"path", f.path}, {"sha256", f.sha256}});
    m["inputs"] = in;
    ordered_json out = ordered_json::array();
    for (const auto& [name, hash] : outputs_) out.push_back({{"path", name}, {"sha256", hash}});
    m["outputs"] = out;
    io::write_text_file(fs::path(o_.out_dir) / "manifest.json", m.dump(2) + "\n");
  }

 private:
  std::string subcommand_;
  const Options& o_;
  std::vector<ingest::SourceFile> inputs_;
  std::vector<std::pair<std::string, std::string>> outputs_;
};

ordered_json analysis_json(const Options& o) {
  ordered_json c;
  c["source"] = o.source;
  c["alpha"] = o.alpha;
  c["poms_subscale_max"] = o.poms_max;
  c["min_sessions"] = o.min_sessions;
  c["format"] = o.format;
  c["transcripts"] = o.transcripts;
  c["self_reports"] = o.self_reports;
  c["predictions"] = o.predictions;
  c["model"] = o.model;
  return c;
}

void require(const std::string& value, const char* flag) {
  if (value.empty()) throw CLI::RequiredError(flag);
}

ingest::CorpusBundle load_corpus(const Options& o, const AnalysisConfig& config, bool reports) {
  require(o.transcripts, "--transcripts");
  ingest::CorpusBundle bundle = ingest::load_transcripts(o.transcripts);
  if (reports) {
    require(o.self_reports, "--self-reports");
    bundle = ingest::load_self_reports(o.self_reports, std::move(bundle), config);
  }
  if (!o.predictions.empty()) bundle = ingest::load_predictions(o.predictions, std::move(bundle));
  for (const std::string& w : bundle.warnings) std::cerr << "warning: " << w << "\n";
  return bundle;
}

// Labels the corpus from the chosen source. The baseline trains on the corpus's
// own gold labels unless a saved model is given.
ingest::CorpusBundle apply_source(ingest::CorpusBundle bundle, const std::string& source,
                                  const Options& o, std::optional<labeling::BaselineModel>* trained = nullptr) {
  if (source == "gold") return labeling::label_corpus(std::move(bundle), labeling::GoldSource{});
  if (source == "external") {
    if (o.predictions.empty()) throw CLI::RequiredError("--predictions (needed by --source external)");
    return labeling::label_corpus(std::move(bundle), labeling::ExternalPredictionsSource{});
  }
  labeling::BaselineModel model = o.model.empty()
                                      ? labeling::train_baseline(bundle.sessions)
                                      : labeling::parse_model(io::read_text_file(o.model));
  if (trained) *trained = model;
  return labeling::label_corpus(std::move(bundle), labeling::BaselineSource{std::move(model)});
}

void emit(const Options& o, const std::string& json, const std::string& table) {
  std::cout << (o.format == "json" ? json : table);
}

int cmd_validate(const Options& o) {
  const AnalysisConfig config = analysis_config(o);
  std::vector<Violation> violations;
  try {
    const ingest::CorpusBundle bundle = load_corpus(o, config, !o.self_reports.empty());
    violations = validate_corpus(bundle.sessions, config);
  } catch (const Error& e) {
    violations.push_back({std::string(to_string(e.code())), e.what()});
  }
  ordered_json doc;
  doc["violations"] = ordered_json::array();
  std::string table;
  for (const Violation& v : violations) {
    doc["violations"].push_back({{"code", v.code}, {"message", v.message}});
    table += v.code + ": " + v.message + "\n";
  }
  doc["count"] = violations.size();
  table += std::to_string(violations.size()) + " violation(s)\n";
  emit(o, doc.dump(2) + "\n", table);
  return violations.empty() ? 0 : kExitViolations;
}

int cmd_label(const Options& o) {
  const AnalysisConfig config = analysis_config(o);
  Run run("label", o);
  ingest::CorpusBundle bundle = load_corpus(o, config, false);
  run.input(bundle.source_manifest);
  if (!o.model.empty()) run.input("model", o.model);
  std::optional<labeling::BaselineModel> trained;
  bundle = apply_source(std::move(bundle), o.source, o, &trained);
  const std::string predictions = ingest::write_predictions(bundle.sessions);
  run.output("predictions.jsonl", predictions);
  if (!o.save_model.empty()) {
    if (!trained) throw CLI::ValidationError("--save-model", "only the baseline source produces a model");
    run.output(o.save_model, labeling::serialize_model(*trained));
  }
  ordered_json c = analysis_json(o);
  c["save_model"] = o.save_model;
  run.finish(c);
  std::size_t labeled = 0;
  for (const auto& s : bundle.sessions) {
    for (const auto& u : s.utterances) labeled += u.predicted_label.has_value();
  }
  std::cerr << "labeled " << labeled << " client utterances from " << o.source << "\n";
  return 0;
}

int cmd_evaluate(const Options& o) {
  Run run("evaluate", o);
  require(o.transcripts, "--transcripts");
  const ingest::CorpusBundle bundle = ingest::load_transcripts(o.transcripts);
  run.input(bundle.source_manifest);
  std::vector<std::string> ids;
  for (const auto& s : bundle.sessions) ids.push_back(s.session_id);
  const eval::FoldPlan plan = eval::make_folds(ids, o.k_folds, o.dev_fraction, o.seed);

  std::unique_ptr<eval::LabelerFactory> factory;
  if (o.source == "external") {
    require(o.train_command, "--train-command");
    require(o.predict_command, "--predict-command");
    factory = std::make_unique<eval::ExternalCommandFactory>(o.train_command, o.predict_command,
                                                             fs::path(o.out_dir) / "external");
  } else if (o.source == "baseline") {
    factory = std::make_unique<eval::BaselineFactory>();
  } else {
    throw CLI::ValidationError("--source", "evaluate trains a labeler: use baseline or external");
  }
  eval::CvOptions options;
  options.balance_ratio = o.balance_ratio;
  options.seed = o.seed;
  options.parallel = !o.sequential;
  const eval::EvalReport report = eval::run_cv(bundle.sessions, *factory, plan, options);
  const std::string json = eval::report_to_json(report);
  const std::string table = eval::report_to_table(report);
  run.output("eval_report.json", json);
  run.output("eval_report.txt", table);
  ordered_json c;
  c["source"] = o.source;
  c["transcripts"] = o.transcripts;
  c["k_folds"] = o.k_folds;
  c["dev_fraction"] = o.dev_fraction;
  c["balance_ratio"] = o.balance_ratio;
  c["train_command"] = o.train_command;
  c["predict_command"] = o.predict_command;
  c["format"] = o.format;
  run.finish(c);
  emit(o, json, table);
  return 0;
}

int cmd_coherence(const Options& o) {
  const AnalysisConfig config = analysis_config(o);
  Run run("coherence", o);
  ingest::CorpusBundle bundle = load_corpus(o, config, true);
  run.input(bundle.source_manifest);
  if (!o.model.empty()) run.input("model", o.model);
  bundle = apply_source(std::move(bundle), o.source, o);
  const coherence::SessionwideReport report = coherence::sessionwide_report(
      bundle.sessions, coherence::LabelField::Predicted, o.source, config);
  const std::string json = coherence::to_json(report, "manifest.json");
  const std::string table = coherence::render_sessionwide(std::span(&report, 1));
  run.output("coherence.json", json);
  run.output("coherence.txt", table);
  run.finish(analysis_json(o));
  emit(o, json, table);
  return 0;
}

int cmd_associate(const Options& o) {
  const AnalysisConfig config = analysis_config(o);
  Run run("associate", o);
  ingest::CorpusBundle bundle = load_corpus(o, config, true);
  run.input(bundle.source_manifest);
  if (!o.model.empty()) run.input("model", o.model);
  bundle = apply_source(std::move(bundle), o.source, o);
  const coherence::AssociationReport report = coherence::association_report(
      bundle.sessions, coherence::LabelField::Predicted, o.source, config);
  const std::string json = coherence::to_json(report, "manifest.json");
  const std::string table = coherence::render_association(report);
  run.output("association.json", json);
  run.output("association.txt", table);
  run.finish(analysis_json(o));
  emit(o, json, table);
  return 0;
}

bool gold_complete(const ingest::CorpusBundle& bundle) {
  for (const auto& s : bundle.sessions) {
    for (const auto& u : s.utterances) {
      if (u.speaker == Speaker::Client && !u.gold_label) return false;
    }
  }
  return true;
}

int cmd_report(const Options& o) {
  const AnalysisConfig config = analysis_config(o);
  Run run("report", o);
  const ingest::CorpusBundle bundle = load_corpus(o, config, true);
  run.input(bundle.source_manifest);
  if (!o.model.empty()) run.input("model", o.model);

  std::vector<std::string> sources;
  if (gold_complete(bundle)) sources.push_back("gold");
  if (o.source != "gold" || sources.empty()) sources.push_back(o.source);

  std::vector<coherence::SessionwideReport> columns;
  std::optional<coherence::AssociationReport> association;
  for (const std::string& source : sources) {
    const ingest::CorpusBundle labeled = apply_source(bundle, source, o);
    columns.push_back(coherence::sessionwide_report(labeled.sessions, coherence::LabelField::Predicted,
                                                    source, config));
    if (source == o.source) {
      association = coherence::association_report(labeled.sessions, coherence::LabelField::Predicted,
                                                  source, config);
    }
  }
  const std::string table =
      coherence::render_sessionwide(columns) + "\n" + coherence::render_association(*association);
  ordered_json doc;
  doc["manifest"] = "manifest.json";
  doc["sessionwide"] = ordered_json::array();
  for (const auto& c : columns) doc["sessionwide"].push_back(ordered_json::parse(coherence::to_json(c, "manifest.json")));
  doc["association"] = ordered_json::parse(coherence::to_json(*association, "manifest.json"));
  const std::string json = doc.dump(2) + "\n";
  run.output("report.json", json);
  run.output("report.txt", table);
  run.finish(analysis_json(o));
  emit(o, json, table);
  return 0;
}

int cmd_synth(const Options& o) {
  Run run("synth", o);
  synth::SynthSpec spec;
  if (!o.spec.empty()) {
    spec = synth::parse_spec(io::read_text_file(o.spec));
    run.input("spec", o.spec);
  }
  // The spec's own seed sits between the config file and the environment.
  const bool spec_has_seed =
      !o.spec.empty() && nlohmann::json::parse(io::read_text_file(o.spec)).contains("seed");
  if (o.seed_origin == "flag" || o.seed_origin == "config" || !spec_has_seed) spec.seed = o.seed;
  const synth::SynthOutput out = synth::generate(spec);
  run.output("transcripts.jsonl", ingest::write_transcripts(out.bundle.sessions));
  run.output("self_reports.csv", ingest::write_self_reports(out.bundle.sessions));
  run.output("ground_truth.json", synth::ground_truth_to_json(out.truth));
  ordered_json c;
  c["spec"] = ordered_json::parse(synth::spec_to_json(spec));
  c["spec_file"] = o.spec;
  run.finish(c);
  std::cerr << "wrote " << out.bundle.sessions.size() << " sessions to " << o.out_dir << "\n";
  return 0;
}

}  // namespace

int main(int argc, char** argv) {
  CLI::App app{"coherelab: emotional coherence analysis of therapy transcripts"};
  app.set_version_flag("--version", std::string(COHERELAB_VERSION));
  app.require_subcommand(1);

  Options o;
  auto add_common = [&](CLI::App* cmd) {
    cmd->add_option("--config", o.config_file, "JSON config file")->check(CLI::ExistingFile);
    cmd->add_option("--seed", o.seed, "random seed (else config, COHERELAB_SEED, 0)");
    cmd->add_option("--out-dir", o.out_dir, "output directory")->capture_default_str();
    cmd->add_option("--format", o.format, "stdout format: json or table")->capture_default_str();
  };
  auto add_inputs = [&](CLI::App* cmd) {
    cmd->add_option("--transcripts", o.transcripts, "transcripts.jsonl");
    cmd->add_option("--self-reports", o.self_reports, "self_reports.csv");
    cmd->add_option("--predictions", o.predictions, "predictions.jsonl");
    cmd->add_option("--poms-max", o.poms_max, "maximum POMS subscale value")->capture_default_str();
  };
  auto add_labels = [&](CLI::App* cmd) {
    cmd->add_option("--source", o.source, "gold, external or baseline")->capture_default_str();
    cmd->add_option("--model", o.model, "saved baseline model (default: train on gold labels)");
  };
  auto add_analysis = [&](CLI::App* cmd) {
    cmd->add_option("--alpha", o.alpha, "significance level")->capture_default_str();
    cmd->add_option("--min-sessions", o.min_sessions, "minimum sessions per client")->capture_default_str();
  };

  std::vector<std::pair<CLI::App*, int (*)(const Options&)>> commands;
  {
    auto* c = app.add_subcommand("validate", "check input files and list violations");
    add_common(c);
    add_inputs(c);
    add_analysis(c);
    commands.emplace_back(c, cmd_validate);
  }
  {
    auto* c = app.add_subcommand("label", "write predictions.jsonl from a label source");
    add_common(c);
    add_inputs(c);
    add_labels(c);
    c->add_option("--save-model", o.save_model, "also save the trained baseline under this name");
    commands.emplace_back(c, cmd_label);
  }
  {
    auto* c = app.add_subcommand("evaluate", "cross-validate a labeler on gold transcripts");
    add_common(c);
    c->add_option("--transcripts", o.transcripts, "gold-labeled transcripts.jsonl");
    c->add_option("--source", o.source, "baseline or external")->default_str("baseline");
    c->add_option("--k-folds", o.k_folds, "number of folds")->capture_default_str();
    c->add_option("--dev-fraction", o.dev_fraction, "dev share of all sessions")->capture_default_str();
    c->add_option("--balance-ratio", o.balance_ratio, "oversampling target ratio")->capture_default_str();
    c->add_option("--train-command", o.train_command, "external: {train} {dev} {model}");
    c->add_option("--predict-command", o.predict_command, "external: {model} {transcripts} {out}");
    c->add_flag("--sequential", o.sequential, "run folds one at a time");
    commands.emplace_back(c, cmd_evaluate);
  }
  {
    auto* c = app.add_subcommand("coherence", "session-wide coherence (POMS vs labels)");
    add_common(c);
    add_inputs(c);
    add_labels(c);
    add_analysis(c);
    commands.emplace_back(c, cmd_coherence);
  }
  {
    auto* c = app.add_subcommand("associate", "client coherence vs mean ORS");
    add_common(c);
    add_inputs(c);
    add_labels(c);
    add_analysis(c);
    commands.emplace_back(c, cmd_associate);
  }
  {
    auto* c = app.add_subcommand("synth", "generate a synthetic corpus with planted correlations");
    add_common(c);
    c->add_option("--spec", o.spec, "synth spec JSON")->check(CLI::ExistingFile);
    commands.emplace_back(c, cmd_synth);
  }
  {
    auto* c = app.add_subcommand("report", "merged coherence and association summary");
    add_common(c);
    add_inputs(c);
    add_labels(c);
    add_analysis(c);
    commands.emplace_back(c, cmd_report);
  }

  try {
    app.parse(argc, argv);
  } catch (const CLI::ParseError& e) {
    const int code = app.exit(e);
    return code == 0 ? 0 : kExitUsage;
  }

  for (auto& [cmd, fn] : commands) {
    if (!cmd->parsed()) continue;
    if (cmd->get_name() == "evaluate" && cmd->count("--source") == 0) o.source = "baseline";
    try {
      resolve(o, *cmd);
      return fn(o);
    } catch (const CLI::Error& e) {
      std::cerr << "usage error: " << e.what() << "\n";
      return kExitUsage;
    } catch (const Error& e) {
      std::cerr << "error: " << e.what() << "\n";
      if (is_numerics_error(e.code())) return kExitNumerics;
      return e.code() == ErrorCode::InvalidArgument ? kExitUsage : kExitData;
    } catch (const std::exception& e) {
      std::cerr << "internal error: " << e.what() << "\n";
      return kExitNumerics;
    }
  }
  return kExitUsage;
}

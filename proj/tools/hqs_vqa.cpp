// Command-line front end: training, evaluation, ablation, error reports and
// the inference service.

#include <CLI11.hpp>
#include <spdlog/spdlog.h>

#include <chrono>
#include <cstdlib>
#include <fstream>
#include <iostream>
#include <optional>
#include <sstream>

#include "hqs/config.hpp"
#include "hqs/error.hpp"
#include "hqs/error_report.hpp"
#include "hqs/pipeline.hpp"
#include "hqs/service.hpp"
#include "hqs/synthetic.hpp"
#include "hqs/wordnet.hpp"

namespace fs = std::filesystem;
using namespace hqs;
using harness::RunConfig;

namespace {

// Writes go to <target>.partial; commit() renames into place, otherwise the
// partial output is deleted.
class Artifact {
 public:
  explicit Artifact(fs::path target) : target_(std::move(target)), tmp_(target_) {
    tmp_ += ".partial";
    fs::remove_all(tmp_);
    if (target_.has_parent_path()) fs::create_directories(target_.parent_path());
  }
  ~Artifact() {
    std::error_code ec;
    if (!committed_) fs::remove_all(tmp_, ec);
  }
  const fs::path& path() const { return tmp_; }
  void commit() {
    fs::remove_all(target_);
    fs::rename(tmp_, target_);
    committed_ = true;
  }

 private:
  fs::path target_, tmp_;
  bool committed_ = false;
};

void write_text(const fs::path& p, const std::string& s) {
  std::ofstream out(p);
  if (!out) throw IoError("cannot write " + p.string());
  out << s;
}

struct Common {
  std::string config;
  std::optional<std::uint64_t> seed;
  std::string mode, dataset;
  std::vector<std::string> overrides;

  void add_to(CLI::App* app) {
    app->add_option("--config", config, "Run configuration file");
    app->add_option("--seed", seed, "Run seed (overrides the config)");
    app->add_option("--mode", mode, "WITH_QS or WITHOUT_QS");
    app->add_option("--dataset", dataset, "rad, clef18 or combined");
    app->add_option("--set", overrides, "key=value config override (repeatable)");
  }

  RunConfig resolve(const std::optional<RunConfig>& base = std::nullopt) const {
    RunConfig c = base ? *base : RunConfig{};
    if (!config.empty()) c = RunConfig::load(config);
    if (seed) c.seed = *seed;
    if (!mode.empty()) c.mode = harness::parse_mode(mode);
    if (!dataset.empty()) c.dataset = harness::parse_dataset(dataset);
    for (const auto& kv : overrides) {
      const auto eq = kv.find('=');
      if (eq == std::string::npos) throw Error("--set expects key=value, got '" + kv + "'");
      c.set(kv.substr(0, eq), kv.substr(eq + 1));
    }
    return c;
  }
};

struct Prepared {
  harness::Splits splits;
  std::unique_ptr<vision::Backbone> backbone;
  harness::FeatureMap features;
};

Prepared prepare(const RunConfig& cfg, std::size_t train_limit = 0, std::size_t test_limit = 0) {
  Prepared p;
  p.splits = harness::load_splits(cfg);
  if (train_limit > 0) p.splits.train = corpus::head(p.splits.train, train_limit);
  if (test_limit > 0) p.splits.test = corpus::head(p.splits.test, test_limit);
  spdlog::info("train {} / test {} items{}", p.splits.train.size(), p.splits.test.size(),
               p.splits.val ? " / val " + std::to_string(p.splits.val->size()) : "");
  p.backbone = vision::make_backbone(cfg.backbone);
  auto cache = vision::FeatureCache::from_env(cfg.cache_dir);
  std::vector<const corpus::Dataset*> sets{&p.splits.train, &p.splits.test};
  if (p.splits.val) sets.push_back(&*p.splits.val);
  p.features = harness::build_features(sets, *p.backbone, &cache);
  return p;
}

std::optional<wordnet::Taxonomy> load_taxonomy(const std::string& dir) {
  std::string d = dir;
  if (d.empty())
    if (const char* env = std::getenv("HQS_WORDNET_DIR")) d = env;
  if (d.empty()) {
    spdlog::warn("no WordNet directory configured; WBSS falls back to exact token matches");
    return std::nullopt;
  }
  return wordnet::Taxonomy::load(d);
}

std::vector<std::uint64_t> parse_seeds(const std::string& s) {
  std::vector<std::uint64_t> out;
  std::stringstream ss(s);
  std::string tok;
  while (std::getline(ss, tok, ',')) {
    if (tok.empty()) continue;
    try {
      out.push_back(std::stoull(tok));
    } catch (const std::exception&) {
      throw Error("invalid seed '" + tok + "'");
    }
  }
  if (out.empty()) throw Error("no seeds given");
  return out;
}

std::string read_file(const fs::path& p) {
  std::ifstream in(p, std::ios::binary);
  if (!in) throw IoError("cannot open " + p.string());
  std::stringstream ss;
  ss << in.rdbuf();
  return ss.str();
}

// JSON lines keyed by qa_id; `field` is read from each record.
std::vector<std::pair<std::string, std::string>> read_keyed(const fs::path& p, const std::vector<std::string>& fields) {
  std::ifstream in(p);
  if (!in) throw IoError("cannot open " + p.string());
  std::vector<std::pair<std::string, std::string>> out;
  std::string line;
  std::size_t lineno = 0;
  while (std::getline(in, line)) {
    ++lineno;
    if (line.find_first_not_of(" \t\r") == std::string::npos) continue;
    try {
      const auto j = nlohmann::json::parse(line);
      std::optional<std::string> v;
      for (const auto& f : fields)
        if (j.contains(f)) {
          v = j.at(f).get<std::string>();
          break;
        }
      if (!v) throw Error("missing " + fields.front());
      out.emplace_back(j.at("qa_id").get<std::string>(), *v);
    } catch (const nlohmann::json::exception& e) {
      throw ParseError(p.string(), lineno, e.what());
    } catch (const Error& e) {
      throw ParseError(p.string(), lineno, e.what());
    }
  }
  return out;
}

void write_predictions(const fs::path& p, const std::vector<harness::PredictionRecord>& recs) {
  std::ofstream out(p);
  if (!out) throw IoError("cannot write " + p.string());
  for (const auto& r : recs) out << r.to_json().dump() << '\n';
}

std::string table8(const harness::SplitEvaluation& e) {
  std::ostringstream os;
  char buf[160];
  os << "subset    n      BLEU    WBSS    accuracy  macro-F1\n";
  for (auto [name, r] : {std::pair{"Yes/No", &e.yes_no}, {"Others", &e.others}, {"Overall", &e.overall}}) {
    std::snprintf(buf, sizeof buf, "%-9s %-6zu %.4f  %.4f  %.4f    %.4f\n", name, r->count, r->bleu, r->wbss,
                  r->accuracy, r->macro_f1);
    os << buf;
  }
  return os.str();
}

int cmd_make_surrogate(const std::string& out, const synthetic::SurrogateOptions& opts) {
  Artifact art(out);
  const auto paths = synthetic::write_surrogate(art.path(), opts);
  art.commit();
  const fs::path root = fs::absolute(out);
  auto rel = [&](const fs::path& p) { return (root / fs::relative(p, art.path())).string(); };
  RunConfig base;
  base.rad_train = rel(paths.rad_train);
  base.rad_test = rel(paths.rad_test);
  base.clef_train = rel(paths.clef_train);
  base.clef_val = rel(paths.clef_val);
  base.clef_test = rel(paths.clef_test);
  base.clef_image_root = rel(paths.clef_images);
  base.cache_dir = (root / "cache").string();
  for (auto d : {harness::DatasetChoice::kRad, harness::DatasetChoice::kClef18, harness::DatasetChoice::kCombined}) {
    auto c = base;
    c.dataset = d;
    c.save(root / (std::string(harness::to_string(d)) + ".conf"));
  }
  std::cout << "wrote surrogate corpora and configs to " << root.string() << "\n";
  return 0;
}

int cmd_train_qs(const RunConfig& cfg, const std::string& out) {
  const auto t0 = std::chrono::steady_clock::now();
  const auto splits = harness::load_splits(cfg);
  auto qcfg = cfg.qs;
  qcfg.svm.seed = derive_seed(cfg.seed, "qs");
  const auto model = qs::train_qs(splits.train, qcfg);
  const auto eval = harness::evaluate_qs(model, splits.test);
  const double secs = std::chrono::duration<double>(std::chrono::steady_clock::now() - t0).count();
  Artifact art(out);
  model.save(art.path());
  fs::path report_path = fs::path(out).replace_extension(".report.json");
  auto report = eval.to_json();
  report["seconds"] = secs;
  report["config"] = cfg.to_text();
  write_text(report_path, report.dump(1) + "\n");
  art.commit();
  std::cout << eval.table() << "train+eval " << secs << " s\n";
  return 0;
}

int cmd_train_vqa(const RunConfig& cfg, const std::string& out) {
  auto p = prepare(cfg);
  Artifact art(out);
  const auto res = harness::train_vqa(cfg, p.splits.train, p.features, p.backbone->tag(),
                                      p.splits.val ? &*p.splits.val : nullptr);
  res.system.save(art.path());
  std::ofstream log(art.path() / "training_log.jsonl");
  for (auto [head, logs] : {std::pair{"yes_no", &res.yes_no_log}, {"others", &res.others_log}})
    for (const auto& e : *logs)
      log << nlohmann::json{{"head", head},
                            {"epoch", e.epoch},
                            {"loss", e.loss},
                            {"categorical_accuracy", e.categorical_accuracy},
                            {"seconds", e.seconds}}
                 .dump()
          << '\n';
  log.close();
  art.commit();
  std::cout << "checkpoint written to " << out << " (" << res.system.model_tag() << ")\n";
  return 0;
}

int cmd_evaluate(const Common& common, const std::string& checkpoint, const std::string& predictions,
                 const std::string& references, const std::string& out, const std::string& wordnet_dir) {
  harness::SplitEvaluation eval;
  nlohmann::json meta;
  if (!predictions.empty()) {
    if (references.empty()) throw Error("--predictions needs --references");
    const auto preds = read_keyed(predictions, {"prediction", "answer"});
    const auto refs = read_keyed(references, {"reference", "answer"});
    std::unordered_map<std::string, std::string> by_id(refs.begin(), refs.end());
    std::vector<harness::PredictionRecord> recs;
    for (const auto& [id, text] : preds) {
      const auto it = by_id.find(id);
      if (it == by_id.end()) throw Error("prediction for unknown qa_id '" + id + "'");
      harness::PredictionRecord r;
      r.qa_id = id;
      r.prediction = text;
      r.reference = it->second;
      r.gold_qtype = corpus::derive_qtype(it->second);
      recs.push_back(std::move(r));
    }
    if (recs.size() != refs.size()) throw Error("predictions cover " + std::to_string(recs.size()) + " of " +
                                                std::to_string(refs.size()) + " references");
    const auto tax = load_taxonomy(wordnet_dir);
    eval = harness::evaluate_predictions(std::move(recs), tax ? &*tax : nullptr);
  } else {
    if (checkpoint.empty()) throw Error("evaluate needs --checkpoint or --predictions/--references");
    const auto system = harness::VqaSystem::load(checkpoint);
    const auto cfg = common.resolve(system.config);
    auto p = prepare(cfg);
    if (p.backbone->tag() != system.backbone_tag)
      throw Error("backbone '" + p.backbone->tag() + "' does not match checkpoint's '" + system.backbone_tag + "'");
    const auto tax = load_taxonomy(wordnet_dir.empty() ? cfg.wordnet_dir : wordnet_dir);
    eval = harness::evaluate_vqa(system, p.splits.test, p.features, tax ? &*tax : nullptr);
    meta = {{"model", system.model_tag()}, {"config", cfg.to_text()}, {"wbss_taxonomy", tax.has_value()}};
  }
  std::cout << table8(eval);
  if (!out.empty()) {
    Artifact art(out);
    auto j = eval.to_json();
    if (!meta.is_null()) j["meta"] = meta;
    write_text(art.path(), j.dump(1) + "\n");
    write_predictions(fs::path(out).replace_extension(".predictions.jsonl"), eval.predictions);
    art.commit();
  }
  return 0;
}

int cmd_predict(const std::string& checkpoint, const std::string& image, const std::string& image_id,
                const std::string& question, const std::string& backbone_spec) {
  const auto system = std::make_shared<harness::VqaSystem>(harness::VqaSystem::load(checkpoint));
  std::shared_ptr<vision::Backbone> backbone =
      vision::make_backbone(backbone_spec.empty() ? system->config.backbone : backbone_spec);
  auto cache = std::make_shared<vision::FeatureCache>(vision::FeatureCache::root_from_env(system->config.cache_dir));
  service::InferenceService svc;
  svc.set_model(system, backbone, cache);
  nlohmann::json req = {{"question", question}};
  if (!image.empty()) req["image"] = service::base64_encode(read_file(image));
  if (!image_id.empty()) req["image_id"] = image_id;
  const auto r = svc.ask(req.dump());
  std::cout << r.body.dump(1) << "\n";
  if (r.status != 200) throw Error(r.body.value("error", "prediction failed"));
  return 0;
}

int cmd_ablate(const RunConfig& cfg, const std::string& seeds, int epochs, std::size_t train_limit,
               std::size_t test_limit, const std::string& out) {
  RunConfig c = cfg;
  if (epochs > 0) c.epochs = epochs;
  auto p = prepare(c, train_limit, test_limit);
  const auto tax = load_taxonomy(c.wordnet_dir);
  const auto res = harness::ablate(c, p.splits, p.features, parse_seeds(seeds), p.backbone->tag(), tax ? &*tax : nullptr);
  std::cout << res.table();
  if (!out.empty()) {
    Artifact art(out);
    auto j = res.to_json();
    j["config"] = c.to_text();
    write_text(art.path(), j.dump(1) + "\n");
    art.commit();
  }
  return 0;
}

struct ReproTarget {
  double bleu, wbss;
};

int cmd_reproduce(const RunConfig& cfg, const std::string& out) {
  // Reference scores for the full 251-epoch WITH_QS run.
  const ReproTarget target = cfg.dataset == harness::DatasetChoice::kRad      ? ReproTarget{0.411, 0.437}
                             : cfg.dataset == harness::DatasetChoice::kClef18 ? ReproTarget{0.132, 0.162}
                                                                              : ReproTarget{0.257, 0.288};
  constexpr double kTolerance = 0.08;
  auto p = prepare(cfg);
  const auto tax = load_taxonomy(cfg.wordnet_dir);
  const auto res = harness::train_vqa(cfg, p.splits.train, p.features, p.backbone->tag(),
                                      p.splits.val ? &*p.splits.val : nullptr);
  const auto eval = harness::evaluate_vqa(res.system, p.splits.test, p.features, tax ? &*tax : nullptr);
  const bool within = std::abs(eval.overall.bleu - target.bleu) <= kTolerance;
  std::cout << table8(eval);
  std::printf("reference BLEU %.3f WBSS %.3f; measured BLEU %.4f WBSS %.4f; |dBLEU| %.4f %s %.2f\n", target.bleu,
              target.wbss, eval.overall.bleu, eval.overall.wbss, std::abs(eval.overall.bleu - target.bleu),
              within ? "<=" : ">", kTolerance);
  if (!out.empty()) {
    Artifact art(out);
    auto j = eval.to_json();
    j["reference"] = {{"bleu", target.bleu}, {"wbss", target.wbss}, {"tolerance", kTolerance}};
    j["within_tolerance"] = within;
    j["config"] = cfg.to_text();
    write_text(art.path(), j.dump(1) + "\n");
    art.commit();
  }
  return 0;
}

int cmd_error_report(const std::string& annotations, const std::string& out) {
  const auto report = harness::aggregate_errors(harness::read_error_records(fs::path(annotations)));
  std::cout << report.table();
  if (!out.empty()) {
    Artifact art(out);
    write_text(art.path(), report.to_json().dump(1) + "\n");
    art.commit();
  }
  return 0;
}

int cmd_serve(const std::string& checkpoint, const service::ServiceOptions& opts, const std::string& backbone_spec) {
  service::InferenceService svc(opts);
  svc.start();
  // health answers 503 until this completes
  auto system = std::make_shared<harness::VqaSystem>(harness::VqaSystem::load(checkpoint));
  std::shared_ptr<vision::Backbone> backbone =
      vision::make_backbone(backbone_spec.empty() ? system->config.backbone : backbone_spec);
  auto cache = std::make_shared<vision::FeatureCache>(vision::FeatureCache::root_from_env(system->config.cache_dir));
  svc.set_model(system, backbone, cache);
  spdlog::info("model {} ready", system->model_tag());
  svc.wait();
  return 0;
}

int fail(const char* type, const std::string& message, int code) {
  std::cerr << nlohmann::json{{"error", {{"type", type}, {"message", message}}}}.dump() << "\n";
  return code;
}

}  // namespace

int main(int argc, char** argv) {
  CLI::App app{"Hierarchical medical visual question answering"};
  app.require_subcommand(1);
  bool verbose = false, quiet = false;
  app.add_flag("-v,--verbose", verbose, "Debug logging");
  app.add_flag("-q,--quiet", quiet, "Warnings and errors only");

  Common common;
  std::string out, checkpoint, predictions, references, wordnet_dir, seeds = "1,2,3", image, image_id, question,
                                                                      annotations, backbone;
  int epochs = 0;
  std::size_t train_limit = 0, test_limit = 0;
  synthetic::SurrogateOptions sopts;
  service::ServiceOptions svc_opts;

  auto* surrogate = app.add_subcommand("make-surrogate", "Write synthetic RAD/CLEF18-layout corpora and configs");
  surrogate->add_option("--out", out, "Output directory")->required();
  surrogate->add_option("--seed", sopts.seed, "Generator seed");
  surrogate->add_option("--rad-train", sopts.rad_train);
  surrogate->add_option("--rad-test", sopts.rad_test);
  surrogate->add_option("--rad-images", sopts.rad_images);
  surrogate->add_option("--clef-train", sopts.clef_train);
  surrogate->add_option("--clef-val", sopts.clef_val);
  surrogate->add_option("--clef-test", sopts.clef_test);

  auto* train_qs = app.add_subcommand("train-qs", "Train and evaluate the question segregation model");
  common.add_to(train_qs);
  train_qs->add_option("--out", out, "Model JSON path")->required();

  auto* train_vqa = app.add_subcommand("train-vqa", "Train the full system and write a checkpoint");
  common.add_to(train_vqa);
  train_vqa->add_option("--out", out, "Checkpoint directory")->required();

  auto* evaluate = app.add_subcommand("evaluate", "Score a checkpoint or a predictions file");
  common.add_to(evaluate);
  evaluate->add_option("--checkpoint", checkpoint);
  evaluate->add_option("--predictions", predictions, "JSON lines {qa_id, prediction}");
  evaluate->add_option("--references", references, "JSON lines {qa_id, reference|answer}");
  evaluate->add_option("--wordnet", wordnet_dir, "WordNet dict directory for WBSS");
  evaluate->add_option("--out", out, "Report JSON path");

  auto* predict = app.add_subcommand("predict", "Answer one question about one image");
  predict->add_option("--checkpoint", checkpoint)->required();
  predict->add_option("--question", question)->required();
  auto* img_opt = predict->add_option("--image", image, "Image file");
  auto* id_opt = predict->add_option("--image-id", image_id, "Cached feature id");
  img_opt->excludes(id_opt);
  predict->add_option("--backbone", backbone, "Backbone spec (default: the checkpoint's)");

  auto* ablate = app.add_subcommand("ablate", "Paired WITH_QS / WITHOUT_QS runs");
  common.add_to(ablate);
  ablate->add_option("--seeds", seeds, "Comma-separated seeds");
  ablate->add_option("--epochs", epochs, "Epoch budget (default: the config's)");
  ablate->add_option("--train-limit", train_limit, "Use only the first N training items");
  ablate->add_option("--test-limit", test_limit, "Use only the first N test items");
  ablate->add_option("--out", out, "Result JSON path");

  auto* reproduce = app.add_subcommand("reproduce", "Full run compared with reference scores (reported, not gated)");
  common.add_to(reproduce);
  reproduce->add_option("--out", out, "Result JSON path");

  auto* error_report = app.add_subcommand("error-report", "Aggregate annotated error records");
  error_report->add_option("--annotations", annotations, "JSON lines ErrorRecord file")->required();
  error_report->add_option("--out", out, "Report JSON path");

  auto* serve = app.add_subcommand("serve", "Run the HTTP inference service");
  serve->add_option("--checkpoint", checkpoint)->required();
  serve->add_option("--host", svc_opts.host);
  serve->add_option("--port", svc_opts.port);
  serve->add_option("--workers", svc_opts.workers);
  serve->add_option("--max-queue", svc_opts.max_queue);
  serve->add_option("--backbone", backbone, "Backbone spec (default: the checkpoint's)");

  try {
    app.parse(argc, argv);
  } catch (const CLI::ParseError& e) {
    return app.exit(e);
  }
  spdlog::set_level(verbose ? spdlog::level::debug : quiet ? spdlog::level::warn : spdlog::level::info);

  try {
    if (*surrogate) return cmd_make_surrogate(out, sopts);
    if (*train_qs) return cmd_train_qs(common.resolve(), out);
    if (*train_vqa) return cmd_train_vqa(common.resolve(), out);
    if (*evaluate) return cmd_evaluate(common, checkpoint, predictions, references, out, wordnet_dir);
    if (*predict) {
      if (image.empty() && image_id.empty()) throw Error("predict needs --image or --image-id");
      return cmd_predict(checkpoint, image, image_id, question, backbone);
    }
    if (*ablate) return cmd_ablate(common.resolve(), seeds, epochs, train_limit, test_limit, out);
    if (*reproduce) return cmd_reproduce(common.resolve(), out);
    if (*error_report) return cmd_error_report(annotations, out);
    if (*serve) return cmd_serve(checkpoint, svc_opts, backbone);
  } catch (const ParseError& e) {
    return fail("ParseError", e.what(), 2);
  } catch (const IoError& e) {
    return fail("IoError", e.what(), 3);
  } catch (const Error& e) {
    return fail("Error", e.what(), 1);
  } catch (const std::exception& e) {
    return fail("InternalError", e.what(), 4);
  }
  return 0;
}

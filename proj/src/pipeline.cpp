#include "hqs/pipeline.hpp"

#include <spdlog/spdlog.h>

#include <algorithm>
#include <chrono>
#include <cstdio>
#include <fstream>
#include <set>
#include <sstream>
#include <unordered_set>

#include "hqs/embedding.hpp"
#include "hqs/error.hpp"
#include "hqs/text.hpp"

namespace hqs::harness {

namespace fs = std::filesystem;
using corpus::QType;

namespace {

corpus::Dataset load_split(const std::string& key, const std::string& path, corpus::Format format,
                           corpus::Split split, const corpus::LoadOptions& opts, std::size_t& skipped) {
  if (path.empty()) throw Error(key + " is not set");
  auto r = corpus::load_dataset(path, format, split, opts);
  skipped += r.skipped;
  return corpus::with_gold_qtypes(r.dataset);
}

Splits load_rad(const RunConfig& cfg) {
  corpus::LoadOptions opts;
  if (!cfg.rad_keys.empty()) opts.keys = corpus::KeyMapping::load(cfg.rad_keys);
  if (!cfg.rad_image_root.empty()) opts.image_root = cfg.rad_image_root;
  Splits s;
  opts.name = "RAD/train";
  s.train = load_split("rad.train", cfg.rad_train, corpus::Format::kRadJson, corpus::Split::kTrain, opts, s.skipped);
  opts.name = "RAD/test";
  s.test = load_split("rad.test", cfg.rad_test, corpus::Format::kRadJson, corpus::Split::kTest, opts, s.skipped);
  return s;
}

Splits load_clef(const RunConfig& cfg) {
  corpus::LoadOptions opts;
  opts.delimiter = cfg.clef_delimiter;
  opts.image_extension = cfg.clef_image_extension;
  if (!cfg.clef_image_root.empty()) opts.image_root = cfg.clef_image_root;
  const auto fmt = corpus::Format::kClef18Delimited;
  Splits s;
  opts.name = "CLEF18/train";
  s.train = load_split("clef18.train", cfg.clef_train, fmt, corpus::Split::kTrain, opts, s.skipped);
  if (!cfg.clef_val.empty()) {
    opts.name = "CLEF18/val";
    s.val = load_split("clef18.val", cfg.clef_val, fmt, corpus::Split::kValidation, opts, s.skipped);
  }
  opts.name = "CLEF18/test";
  s.test = load_split("clef18.test", cfg.clef_test, fmt, corpus::Split::kTest, opts, s.skipped);
  return s;
}

std::string fmt4(double v) {
  char buf[32];
  std::snprintf(buf, sizeof buf, "%.4f", v);
  return buf;
}

text::EmbeddingTable make_embeddings(const RunConfig& cfg, const text::Vocab& vocab,
                                     const std::vector<std::vector<std::string>>& docs) {
  auto sub_opts = cfg.subword;
  sub_opts.seed = derive_seed(cfg.seed, "subword");
  const auto subwords = text::SubwordModel::train(docs, sub_opts);
  std::optional<text::WordVectors> glove;
  if (!cfg.glove_path.empty()) {
    std::unordered_set<std::string> keep(vocab.words().begin(), vocab.words().end());
    glove = text::WordVectors::load(cfg.glove_path, cfg.word_dim, &keep);
    spdlog::info("loaded {} word vectors from {}", glove->size(), cfg.glove_path);
  }
  return text::build_embedding_table(vocab, glove ? &*glove : nullptr, cfg.word_dim, subwords);
}

bool is_yes(const std::string& answer) { return corpus::normalize_answer(answer) == fusion::kYes; }

// Gathers question ids, image features and both kinds of targets.
fusion::Batch make_batch(const std::vector<const corpus::QAItem*>& items, const text::Vocab& question_vocab,
                         const text::Vocab* answer_vocab, const fusion::NetConfig& net, const FeatureMap& features) {
  const auto n = static_cast<Eigen::Index>(items.size());
  fusion::Batch b;
  b.ids.resize(net.seq_len, n);
  b.images.resize(net.image_dim, n);
  if (answer_vocab) b.answers.resize(net.answer_len, n);
  for (Eigen::Index j = 0; j < n; ++j) {
    const auto& it = *items[static_cast<std::size_t>(j)];
    const auto q = text::encode(text::preprocess_question(it.question), question_vocab,
                                static_cast<std::size_t>(net.seq_len));
    for (int t = 0; t < net.seq_len; ++t) b.ids(t, j) = q.ids[static_cast<std::size_t>(t)];
    const auto f = features.find(feature_key(it));
    if (f == features.end()) throw Error("no image features for " + feature_key(it));
    if (static_cast<int>(f->second.size()) != net.image_dim)
      throw Error("image feature width " + std::to_string(f->second.size()) + " != net.image_dim " +
                  std::to_string(net.image_dim));
    b.images.col(j) = Eigen::Map<const Eigen::VectorXf>(f->second.data(), net.image_dim);
    if (answer_vocab) {
      const auto a = text::encode(text::answer_tokens(it.answer), *answer_vocab,
                                  static_cast<std::size_t>(net.answer_len));
      for (int s = 0; s < net.answer_len; ++s) b.answers(s, j) = a.ids[static_cast<std::size_t>(s)];
    }
    b.labels.push_back(is_yes(it.answer) ? 0 : 1);
  }
  return b;
}

std::vector<const corpus::QAItem*> with_qtype(const corpus::Dataset& d, std::optional<QType> t) {
  std::vector<const corpus::QAItem*> out;
  for (const auto& it : d.items())
    if (!it.answer.empty() && (!t || it.qtype == *t)) out.push_back(&it);
  return out;
}

// Lexicographic (BLEU, accuracy): BLEU alone is flat at 0 for one-word answers.
struct ValScore {
  double bleu = -1.0, accuracy = -1.0;
  bool operator>(const ValScore& o) const { return bleu != o.bleu ? bleu > o.bleu : accuracy > o.accuracy; }
};

fusion::HeadModel train_head(fusion::HeadKind kind, const RunConfig& cfg, const text::Vocab& answer_vocab,
                             const Eigen::MatrixXf& table, const fusion::Batch& data,
                             const fusion::Batch* val_batch, const std::vector<std::string>* val_refs,
                             std::vector<fusion::EpochLog>& log) {
  fusion::HeadModel head(kind, cfg.net, answer_vocab, table, cfg.seed);
  auto tc = cfg.train_config();
  std::optional<fusion::HeadModel::Snapshot> best;
  ValScore best_score;
  int best_epoch = 0;
  if (val_batch) {
    tc.on_epoch_model = [&](const fusion::EpochLog& e, fusion::HeadModel& m) {
      std::vector<std::string> preds;
      for (auto& p : m.predict(*val_batch)) preds.push_back(std::move(p.decoded_text));
      const auto r = metrics::evaluate(preds, *val_refs, nullptr);
      const ValScore s{r.bleu, r.accuracy};
      if (s > best_score) {
        best_score = s;
        best_epoch = e.epoch;
        best = m.snapshot();
      }
    };
  }
  log = head.train(data, tc);
  if (best) {
    spdlog::info("{} head: keeping epoch {} (val BLEU {:.4f}, accuracy {:.4f})", fusion::to_string(kind), best_epoch,
                 best_score.bleu, best_score.accuracy);
    head.restore(*best);
    if (tc.population_bn_stats) head.recompute_bn_statistics(data);
  }
  return head;
}

nlohmann::json read_json(const fs::path& p) {
  std::ifstream in(p);
  if (!in) throw IoError("cannot open " + p.string());
  try {
    return nlohmann::json::parse(in);
  } catch (const nlohmann::json::exception& e) {
    throw Error(p.string() + ": " + e.what());
  }
}

void write_json(const fs::path& p, const nlohmann::json& j) {
  std::ofstream out(p);
  if (!out) throw IoError("cannot write " + p.string());
  out << j.dump(1) << '\n';
}

}  // namespace

Splits load_splits(const RunConfig& cfg) {
  switch (cfg.dataset) {
    case DatasetChoice::kRad: return load_rad(cfg);
    case DatasetChoice::kClef18: return load_clef(cfg);
    case DatasetChoice::kCombined: {
      auto rad = load_rad(cfg);
      auto clef = load_clef(cfg);
      Splits s;
      s.train = corpus::merge(rad.train, clef.train);
      s.test = corpus::merge(rad.test, clef.test);
      s.val = clef.val;
      s.skipped = rad.skipped + clef.skipped;
      return s;
    }
  }
  throw Error("unknown dataset choice");
}

std::string feature_key(const corpus::QAItem& item) {
  return std::string(corpus::to_string(item.source)) + "/" + item.image_id;
}

FeatureMap build_features(const std::vector<const corpus::Dataset*>& sets, const vision::Backbone& backbone,
                          vision::FeatureCache* cache) {
  std::vector<std::pair<std::string, std::string>> todo;
  std::set<std::string> seen;
  for (const auto* d : sets)
    for (const auto& it : d->items())
      if (seen.insert(feature_key(it)).second) todo.emplace_back(feature_key(it), it.image_path);
  const auto t0 = std::chrono::steady_clock::now();
  auto vecs = vision::features_for(todo, backbone, cache);
  spdlog::info("features for {} images ({}) in {:.1f}s", todo.size(), backbone.tag(),
               std::chrono::duration<double>(std::chrono::steady_clock::now() - t0).count());
  FeatureMap out;
  for (std::size_t i = 0; i < todo.size(); ++i) out.emplace(todo[i].first, std::move(vecs[i]));
  return out;
}

nlohmann::json QsEvaluation::to_json() const {
  nlohmann::json classes = nlohmann::json::object();
  for (const auto& [k, c] : prf.per_class)
    classes[k] = {{"precision", c.precision}, {"recall", c.recall}, {"f1", c.f1}, {"support", c.support}};
  return {{"count", count},
          {"accuracy", accuracy},
          {"per_class", classes},
          {"macro", {{"precision", prf.macro_p}, {"recall", prf.macro_r}, {"f1", prf.macro_f1}}},
          {"weighted", {{"precision", prf.weighted_p}, {"recall", prf.weighted_r}, {"f1", prf.weighted_f1}}}};
}

std::string QsEvaluation::table() const {
  std::ostringstream os;
  os << "class        precision  recall  f1      support\n";
  auto row = [&](const std::string& name, double p, double r, double f, std::size_t n) {
    std::string pad = name;
    pad.resize(std::max<std::size_t>(13, name.size()), ' ');
    os << pad << fmt4(p) << "     " << fmt4(r) << "  " << fmt4(f) << "  " << n << "\n";
  };
  for (const auto& [k, c] : prf.per_class) row(k, c.precision, c.recall, c.f1, c.support);
  row("macro", prf.macro_p, prf.macro_r, prf.macro_f1, count);
  row("weighted", prf.weighted_p, prf.weighted_r, prf.weighted_f1, count);
  os << "accuracy     " << fmt4(accuracy) << "\n";
  return os.str();
}

QsEvaluation evaluate_qs(const qs::QsModel& model, const corpus::Dataset& test) {
  std::vector<std::string> gold, pred;
  for (const auto& it : test.items()) {
    if (it.answer.empty()) continue;
    gold.emplace_back(corpus::to_string(corpus::derive_qtype(it.answer)));
    pred.emplace_back(corpus::to_string(model.predict(it.question).qtype));
  }
  if (gold.empty()) throw Error("no labeled items to evaluate question segregation on");
  QsEvaluation e;
  e.prf = metrics::macro_prf(gold, pred, {"YES_NO", "OTHERS"});
  e.accuracy = metrics::accuracy(gold, pred);
  e.count = gold.size();
  return e;
}

fusion::Batch VqaSystem::encode(const std::vector<Query>& queries) const {
  const auto& net = others ? others->config() : yes_no->config();
  const auto n = static_cast<Eigen::Index>(queries.size());
  fusion::Batch b;
  b.ids.resize(net.seq_len, n);
  b.images.resize(net.image_dim, n);
  for (Eigen::Index j = 0; j < n; ++j) {
    const auto& q = queries[static_cast<std::size_t>(j)];
    const auto seq = text::encode(text::preprocess_question(q.question), question_vocab,
                                  static_cast<std::size_t>(net.seq_len));
    for (int t = 0; t < net.seq_len; ++t) b.ids(t, j) = seq.ids[static_cast<std::size_t>(t)];
    if (static_cast<int>(q.image.size()) != net.image_dim)
      throw Error("image feature width " + std::to_string(q.image.size()) + " != " + std::to_string(net.image_dim));
    b.images.col(j) = Eigen::Map<const Eigen::VectorXf>(q.image.data(), net.image_dim);
  }
  return b;
}

std::vector<fusion::AnswerPrediction> VqaSystem::answer(const std::vector<Query>& queries) const {
  if (!others) throw Error("system has no OTHERS head");
  std::vector<fusion::AnswerPrediction> out(queries.size());
  if (queries.empty()) return out;
  const auto batch = encode(queries);
  std::vector<int> yn_idx, ot_idx;
  std::vector<double> margins(queries.size(), 0.0);
  for (std::size_t i = 0; i < queries.size(); ++i) {
    if (mode == Mode::kWithQs) {
      if (!qs || !yes_no) throw Error("WITH_QS system is missing its router or YES_NO head");
      const auto p = qs->predict(queries[i].question);
      margins[i] = p.margin;
      (p.qtype == QType::kYesNo ? yn_idx : ot_idx).push_back(static_cast<int>(i));
    } else {
      ot_idx.push_back(static_cast<int>(i));
    }
  }
  auto run = [&](const fusion::HeadModel& head, const std::vector<int>& idx) {
    if (idx.empty()) return;
    auto preds = head.predict(fusion::slice(batch, idx));
    for (std::size_t k = 0; k < idx.size(); ++k) {
      auto& dst = out[static_cast<std::size_t>(idx[k])];
      dst = std::move(preds[k]);
      dst.margin = margins[static_cast<std::size_t>(idx[k])];
    }
  };
  if (yes_no) run(*yes_no, yn_idx);
  run(*others, ot_idx);
  return out;
}

std::string VqaSystem::model_tag() const {
  return "hqs-vqa/" + std::string(to_string(mode)) + "/seed-" + std::to_string(config.seed);
}

void VqaSystem::save(const fs::path& dir) const {
  fs::create_directories(dir);
  config.save(dir / "config.txt");
  write_json(dir / "question_vocab.json", question_vocab.to_json());
  if (qs) qs->save(dir / "qs.json");
  if (yes_no) yes_no->save(dir / "yes_no");
  if (others) others->save(dir / "others");
  write_json(dir / "manifest.json", {{"format", "hqs-vqa/1"},
                                     {"mode", std::string(to_string(mode))},
                                     {"model_tag", model_tag()},
                                     {"backbone_tag", backbone_tag}});
}

VqaSystem VqaSystem::load(const fs::path& dir) {
  if (!fs::is_directory(dir)) throw IoError("checkpoint directory " + dir.string() + " does not exist");
  const auto manifest = read_json(dir / "manifest.json");
  if (manifest.value("format", "") != "hqs-vqa/1") throw Error(dir.string() + ": not an hqs-vqa checkpoint");
  VqaSystem s;
  s.mode = parse_mode(manifest.at("mode").get<std::string>());
  s.backbone_tag = manifest.at("backbone_tag").get<std::string>();
  s.config = RunConfig::load(dir / "config.txt");
  s.question_vocab = text::Vocab::from_json(read_json(dir / "question_vocab.json"));
  if (s.mode == Mode::kWithQs) {
    s.qs = qs::QsModel::load(dir / "qs.json");
    s.yes_no = fusion::HeadModel::load(dir / "yes_no");
  }
  s.others = fusion::HeadModel::load(dir / "others");
  return s;
}

TrainOutput train_vqa(const RunConfig& cfg, const corpus::Dataset& train, const FeatureMap& features,
                      const std::string& backbone_tag, const corpus::Dataset* val) {
  const bool select_best = cfg.select == "best_val_bleu";
  if (select_best && (!val || val->empty()))
    throw Error("train.select = best_val_bleu needs a validation split");
  TrainOutput out;
  auto& sys = out.system;
  sys.mode = cfg.mode;
  sys.config = cfg;
  sys.backbone_tag = backbone_tag;

  std::vector<std::vector<std::string>> docs;
  for (const auto& it : train.items()) docs.push_back(text::preprocess_question(it.question));
  sys.question_vocab = text::build_vocab(docs, cfg.question_vocab_size, text::Vocab::question_reserved());
  const auto table = make_embeddings(cfg, sys.question_vocab, docs);
  if (static_cast<int>(table.dim()) != cfg.net.embed_dim)
    throw Error("embedding width " + std::to_string(table.dim()) + " != net embed_dim " +
                std::to_string(cfg.net.embed_dim));

  auto answer_vocab_for = [](const std::vector<const corpus::QAItem*>& items) {
    std::vector<std::vector<std::string>> a;
    for (const auto* it : items) a.push_back(text::answer_tokens(it->answer));
    return text::build_unbounded_vocab(a, text::Vocab::answer_reserved());
  };
  auto fit = [&](fusion::HeadKind kind, std::optional<QType> gold, std::vector<fusion::EpochLog>& log) {
    const auto items = with_qtype(train, gold);
    if (items.empty())
      throw Error("empty routed subset for the " + std::string(fusion::to_string(kind)) + " head");
    const auto vocab = kind == fusion::HeadKind::kOthers ? answer_vocab_for(items) : text::Vocab();
    const auto* av = kind == fusion::HeadKind::kOthers ? &vocab : nullptr;
    const auto data = make_batch(items, sys.question_vocab, av, cfg.net, features);
    std::optional<fusion::Batch> vb;
    std::vector<std::string> vrefs;
    if (select_best) {
      const auto vitems = with_qtype(*val, gold);
      if (!vitems.empty()) {
        vb = make_batch(vitems, sys.question_vocab, av, cfg.net, features);
        for (const auto* it : vitems) vrefs.push_back(it->answer);
      }
    }
    spdlog::info("training {} head on {} items ({} epochs)", fusion::to_string(kind), items.size(), cfg.epochs);
    return train_head(kind, cfg, vocab, table.vectors, data, vb ? &*vb : nullptr, &vrefs, log);
  };

  if (cfg.mode == Mode::kWithQs) {
    auto qcfg = cfg.qs;
    qcfg.svm.seed = derive_seed(cfg.seed, "qs");
    sys.qs = qs::train_qs(train, qcfg);
    sys.yes_no = fit(fusion::HeadKind::kYesNo, QType::kYesNo, out.yes_no_log);
    sys.others = fit(fusion::HeadKind::kOthers, QType::kOthers, out.others_log);
  } else {
    sys.others = fit(fusion::HeadKind::kOthers, std::nullopt, out.others_log);
  }
  return out;
}

nlohmann::json PredictionRecord::to_json() const {
  return {{"qa_id", qa_id},
          {"prediction", prediction},
          {"reference", reference},
          {"gold_qtype", std::string(corpus::to_string(gold_qtype))},
          {"routed_qtype", std::string(corpus::to_string(routed_qtype))},
          {"margin", margin}};
}

nlohmann::json SplitEvaluation::to_json() const {
  return {{"yes_no", yes_no.to_json()}, {"others", others.to_json()}, {"overall", overall.to_json()}};
}

SplitEvaluation evaluate_predictions(std::vector<PredictionRecord> records, const wordnet::Taxonomy* taxonomy) {
  SplitEvaluation e;
  auto report = [&](std::optional<QType> t) {
    std::vector<std::string> p, r;
    for (const auto& rec : records)
      if (!t || rec.gold_qtype == *t) {
        p.push_back(rec.prediction);
        r.push_back(rec.reference);
      }
    return p.empty() ? metrics::EvalReport{} : metrics::evaluate(p, r, taxonomy);
  };
  e.yes_no = report(QType::kYesNo);
  e.others = report(QType::kOthers);
  e.overall = report(std::nullopt);
  e.predictions = std::move(records);
  return e;
}

SplitEvaluation evaluate_vqa(const VqaSystem& system, const corpus::Dataset& test, const FeatureMap& features,
                             const wordnet::Taxonomy* taxonomy) {
  std::vector<Query> queries;
  std::vector<const corpus::QAItem*> items;
  for (const auto& it : test.items()) {
    if (it.answer.empty()) continue;
    const auto f = features.find(feature_key(it));
    if (f == features.end()) throw Error("no image features for " + feature_key(it));
    queries.push_back({it.question, f->second});
    items.push_back(&it);
  }
  if (items.empty()) throw Error("no labeled items in " + test.name());
  const auto preds = system.answer(queries);
  std::vector<PredictionRecord> records;
  for (std::size_t i = 0; i < items.size(); ++i) {
    PredictionRecord r;
    r.qa_id = items[i]->qa_id;
    r.prediction = preds[i].decoded_text;
    r.reference = items[i]->answer;
    r.gold_qtype = corpus::derive_qtype(items[i]->answer);
    r.routed_qtype = preds[i].qtype;
    r.margin = preds[i].margin;
    records.push_back(std::move(r));
  }
  return evaluate_predictions(std::move(records), taxonomy);
}

double AblationResult::mean_bleu(Mode m) const {
  if (rows.empty()) return 0.0;
  double s = 0.0;
  for (const auto& r : rows) s += (m == Mode::kWithQs ? r.with_qs : r.without_qs).overall.bleu;
  return s / static_cast<double>(rows.size());
}

nlohmann::json AblationResult::to_json() const {
  nlohmann::json rs = nlohmann::json::array();
  for (const auto& r : rows)
    rs.push_back({{"seed", r.seed},
                  {"WITH_QS", r.with_qs.to_json()},
                  {"WITHOUT_QS", r.without_qs.to_json()},
                  {"delta_bleu", r.with_qs.overall.bleu - r.without_qs.overall.bleu},
                  {"delta_wbss", r.with_qs.overall.wbss - r.without_qs.overall.wbss},
                  {"yes_no_routing_ok", r.yes_no_routing_ok}});
  return {{"rows", rs},
          {"mean_bleu", {{"WITH_QS", mean_bleu(Mode::kWithQs)}, {"WITHOUT_QS", mean_bleu(Mode::kWithoutQs)}}}};
}

std::string AblationResult::table() const {
  std::ostringstream os;
  os << "seed  mode        yes/no acc  others BLEU  overall BLEU  overall WBSS\n";
  for (const auto& r : rows) {
    for (const auto* e : {&r.with_qs, &r.without_qs}) {
      os << r.seed << (r.seed < 10 ? "     " : "    ") << (e == &r.with_qs ? "WITH_QS     " : "WITHOUT_QS  ")
         << fmt4(e->yes_no.accuracy) << "      " << fmt4(e->others.bleu) << "       " << fmt4(e->overall.bleu)
         << "        " << fmt4(e->overall.wbss) << "\n";
    }
    os << "      delta BLEU " << fmt4(r.with_qs.overall.bleu - r.without_qs.overall.bleu) << ", yes/no routing "
       << (r.yes_no_routing_ok ? "ok" : "VIOLATED") << "\n";
  }
  os << "mean overall BLEU: WITH_QS " << fmt4(mean_bleu(Mode::kWithQs)) << ", WITHOUT_QS "
     << fmt4(mean_bleu(Mode::kWithoutQs)) << "\n";
  return os.str();
}

AblationResult ablate(const RunConfig& base, const Splits& splits, const FeatureMap& features,
                      const std::vector<std::uint64_t>& seeds, const std::string& backbone_tag,
                      const wordnet::Taxonomy* taxonomy) {
  AblationResult res;
  const corpus::Dataset* val = splits.val ? &*splits.val : nullptr;
  for (auto seed : seeds) {
    AblationRow row;
    row.seed = seed;
    for (Mode m : {Mode::kWithQs, Mode::kWithoutQs}) {
      RunConfig cfg = base;
      cfg.seed = seed;
      cfg.mode = m;
      spdlog::info("ablation seed {} {}", seed, to_string(m));
      // scoped so only one system's weights are alive at a time
      auto eval = evaluate_vqa(train_vqa(cfg, splits.train, features, backbone_tag, val).system, splits.test,
                               features, taxonomy);
      if (m == Mode::kWithQs) {
        for (const auto& p : eval.predictions)
          if (p.routed_qtype == QType::kYesNo && p.prediction != fusion::kYes && p.prediction != fusion::kNo)
            row.yes_no_routing_ok = false;
        row.with_qs = std::move(eval);
      } else {
        row.without_qs = std::move(eval);
      }
    }
    res.rows.push_back(std::move(row));
  }
  return res;
}

}  // namespace hqs::harness

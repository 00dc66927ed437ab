#include "psearch/cli.hpp"

#include <algorithm>
#include <cstdio>
#include <filesystem>
#include <iostream>
#include <optional>
#include <set>
#include <sstream>

#include <CLI11.hpp>

#include "psearch/distill.hpp"
#include "psearch/errors.hpp"
#include "psearch/evaluation.hpp"
#include "psearch/geometry.hpp"
#include "psearch/io.hpp"
#include "psearch/losses.hpp"
#include "psearch/rcp.hpp"
#include "psearch/rng.hpp"
#include "psearch/simulator.hpp"

namespace psearch::cli {

namespace fs = std::filesystem;

namespace {

constexpr const char* kScenesFile = "scenes.jsonl";
constexpr const char* kFeaturesFile = "features.psgf";
constexpr const char* kQueriesFile = "queries.jsonl";

std::string fixed(double v, int digits = 10) {
  char buf[64];
  std::snprintf(buf, sizeof buf, "%.*f", digits, v);
  return buf;
}

// Where a dataset lives: either a directory written by `simulate` or
// explicit file paths.
struct DataPaths {
  std::string dir;
  std::string annotations;
  std::string features;
  std::string queries;

  void add_options(CLI::App& app, bool need_queries) {
    app.add_option("--data", dir, "Directory with scenes.jsonl, features.psgf, queries.jsonl");
    app.add_option("--annotations", annotations, "Annotation file (JSON lines)");
    app.add_option("--features", features, "Feature file (PSGF)");
    if (need_queries) app.add_option("--queries", queries, "Query list (JSON lines)");
  }

  void resolve(bool need_queries) {
    auto pick = [&](std::string& p, const char* name) {
      if (p.empty() && !dir.empty()) p = (fs::path(dir) / name).string();
      if (p.empty()) throw ValidationError(std::string("missing input: pass --data or the path for ") + name);
    };
    pick(annotations, kScenesFile);
    pick(features, kFeaturesFile);
    if (need_queries) pick(queries, kQueriesFile);
  }
};

struct Dataset {
  std::vector<SceneRecord> scenes;
  std::vector<std::vector<EmbeddingVec>> embeddings;
  std::vector<QueryRef> query_refs;
};

Dataset load_dataset(DataPaths paths, bool need_queries) {
  paths.resolve(need_queries);
  Dataset ds;
  ds.scenes = load_annotations(paths.annotations);
  ds.embeddings = align_features(ds.scenes, load_features(paths.features));
  if (need_queries) ds.query_refs = load_query_refs(paths.queries);
  return ds;
}

std::size_t scene_index(const Dataset& ds, const std::string& id) {
  for (std::size_t i = 0; i < ds.scenes.size(); ++i) {
    if (ds.scenes[i].scene_id == id) return i;
  }
  throw ValidationError("unknown scene '" + id + "'");
}

// Gallery of every scene that holds no query; optionally a seeded subset of
// `gallery_size` of those scenes.
GalleryIndex gallery_without_queries(const Dataset& ds, std::optional<std::size_t> gallery_size,
                                     std::uint64_t seed) {
  std::set<std::string> query_scenes;
  for (const auto& q : ds.query_refs) query_scenes.insert(q.scene_id);
  std::vector<std::size_t> keep;
  for (std::size_t i = 0; i < ds.scenes.size(); ++i) {
    if (!query_scenes.count(ds.scenes[i].scene_id)) keep.push_back(i);
  }
  if (gallery_size && *gallery_size < keep.size()) {
    Rng rng(seed);
    rng.shuffle(keep.begin(), keep.end());
    keep.resize(*gallery_size);
    std::sort(keep.begin(), keep.end());
  }
  std::vector<SceneRecord> scenes;
  std::vector<EmbeddingVec> embs;
  for (std::size_t i : keep) {
    scenes.push_back(ds.scenes[i]);
    embs.insert(embs.end(), ds.embeddings[i].begin(), ds.embeddings[i].end());
  }
  const std::size_t dim = embs.empty() ? kDefaultEmbeddingDim : embs.front().dim();
  return build_gallery(scenes, embs, dim);
}

QuerySpec query_from_ref(const Dataset& ds, const QueryRef& ref) {
  const std::size_t s = scene_index(ds, ref.scene_id);
  return make_query(ds.scenes[s], ref.index, ds.embeddings[s]);
}

CandidateMode parse_mode(const std::string& m) {
  if (m == "all") return CandidateMode::kAllDetections;
  if (m == "argmax") return CandidateMode::kSceneArgmax;
  throw ValidationError("unknown candidate mode '" + m + "' (expected all or argmax)");
}

// ---- simulate -------------------------------------------------------------

struct SimulateCmd {
  std::optional<std::uint64_t> seed;
  std::string out_dir;
  SimConfig cfg = SimConfig::standard();
  std::size_t n_queries = 30;

  void add(CLI::App& app) {
    app.add_option("--seed", seed, "Random seed (required)")->required();
    app.add_option("--out", out_dir, "Output directory")->required();
    app.add_option("--n-identities", cfg.n_identities);
    app.add_option("--group-min", cfg.group_size_range.first);
    app.add_option("--group-max", cfg.group_size_range.second);
    app.add_option("--n-scenes", cfg.n_scenes);
    app.add_option("--persons-min", cfg.persons_per_scene_range.first);
    app.add_option("--persons-max", cfg.persons_per_scene_range.second);
    app.add_option("--co-travel-prob", cfg.co_travel_prob);
    app.add_option("--noise-sigma", cfg.noise_sigma);
    app.add_option("--dim", cfg.embed_dim);
    app.add_option("--distractor-rate", cfg.distractor_rate);
    app.add_option("--n-queries", n_queries, "Number of query appearances");
  }

  int run(std::ostream& out) {
    cfg.seed = *seed;
    const SimWorld world = generate_world(cfg);
    const QuerySplit split = split_queries(world, n_queries, *seed);
    fs::create_directories(out_dir);
    save_annotations(fs::path(out_dir) / kScenesFile, world.scenes);
    save_features(fs::path(out_dir) / kFeaturesFile,
                  make_feature_file(world.scenes, world.embeddings, static_cast<std::uint32_t>(cfg.embed_dim)));
    std::vector<QueryRef> refs;
    for (const auto& q : split.queries) refs.push_back(QueryRef{q.scene_id, q.target_index});
    save_query_refs(fs::path(out_dir) / kQueriesFile, refs);
    std::size_t n_dets = 0;
    for (const auto& s : world.scenes) n_dets += s.detections.size();
    out << "scenes=" << world.scenes.size() << " detections=" << n_dets << " queries=" << refs.size()
        << " gallery_entries=" << split.gallery.size() << " dim=" << cfg.embed_dim << "\n";
    return 0;
  }
};

// ---- build-gallery --------------------------------------------------------

struct BuildGalleryCmd {
  DataPaths paths;
  std::string exclude_queries;
  std::string out_path;

  void add(CLI::App& app) {
    paths.add_options(app, false);
    app.add_option("--exclude-queries", exclude_queries, "Query list whose scenes are left out");
    app.add_option("--out", out_path, "Write the normalized gallery features here");
  }

  int run(std::ostream& out) {
    Dataset ds = load_dataset(paths, false);
    if (!exclude_queries.empty()) ds.query_refs = load_query_refs(exclude_queries);
    const GalleryIndex g = gallery_without_queries(ds, std::nullopt, 0);
    if (!out_path.empty()) {
      FeatureFile f{static_cast<std::uint32_t>(g.dim()), {}};
      for (const auto& e : g.entries()) {
        const auto& b = e.detection.box;
        FeatureRecord r{e.scene_id,
                        {static_cast<float>(b.x1()), static_cast<float>(b.y1()), static_cast<float>(b.x2()),
                         static_cast<float>(b.y2())},
                        {}};
        for (double v : e.embedding.values()) r.embedding.push_back(static_cast<float>(v));
        f.records.push_back(std::move(r));
      }
      save_features(out_path, f);
    }
    out << "entries=" << g.size() << " scenes=" << g.scenes().size() << " dim=" << g.dim() << "\n";
    return 0;
  }
};

// ---- search ---------------------------------------------------------------

struct SearchCmd {
  DataPaths paths;
  std::optional<std::size_t> query_number;
  std::string scene;
  std::size_t index = 0;
  std::size_t topk = 10;
  RcpParams params;
  bool baseline = false;
  std::string mode = "all";

  void add(CLI::App& app) {
    paths.add_options(app, true);
    app.add_option("--query", query_number, "Position in the query list (0-based)");
    app.add_option("--scene", scene, "Query scene id (instead of --query)");
    app.add_option("--index", index, "Detection index within --scene");
    app.add_option("--topk", topk, "Number of candidates to print");
    app.add_option("--lambda", params.lambda, "Context score weight");
    app.add_option("--threshold-b", params.b, "Context match gate");
    app.add_flag("--baseline", baseline, "Rank by individual similarity only");
    app.add_option("--mode", mode, "Candidates: all | argmax (one per scene)");
  }

  int run(std::ostream& out) {
    Dataset ds = load_dataset(paths, true);
    QueryRef ref;
    if (!scene.empty()) {
      ref = QueryRef{scene, index};
    } else {
      const std::size_t n = query_number.value_or(0);
      if (n >= ds.query_refs.size()) throw ValidationError("--query " + std::to_string(n) + " out of range");
      ref = ds.query_refs[n];
    }
    if (std::none_of(ds.query_refs.begin(), ds.query_refs.end(),
                     [&](const QueryRef& r) { return r.scene_id == ref.scene_id; })) {
      ds.query_refs.push_back(ref);
    }
    const GalleryIndex g = gallery_without_queries(ds, std::nullopt, 0);
    const QuerySpec q = query_from_ref(ds, ref);
    const CandidateMode m = parse_mode(mode);
    const RankedList ranked = baseline ? rank_baseline(q, g, m) : rank_rcp(q, g, params, m);
    out << "rank\tscene_id\tx1\ty1\tx2\ty2\tperson_id\ts_individual\ts_context\ts_final\n";
    for (std::size_t i = 0; i < std::min(topk, ranked.candidates.size()); ++i) {
      const auto& c = ranked.candidates[i];
      const auto& e = g.entry(c.entry);
      const auto& b = e.detection.box;
      out << (i + 1) << '\t' << e.scene_id << '\t' << fixed(b.x1(), 2) << '\t' << fixed(b.y1(), 2) << '\t'
          << fixed(b.x2(), 2) << '\t' << fixed(b.y2(), 2) << '\t'
          << (e.detection.person_id.labeled() ? std::to_string(e.detection.person_id.value()) : "null") << '\t'
          << fixed(c.s_individual) << '\t' << fixed(c.s_context) << '\t' << fixed(c.s_final) << '\n';
    }
    return 0;
  }
};

// ---- evaluate -------------------------------------------------------------

struct EvaluateCmd {
  DataPaths paths;
  bool rcp = false;
  bool baseline = false;
  RcpParams params;
  MatchConfig match;
  std::optional<std::size_t> gallery_size;
  std::optional<std::uint64_t> seed;
  std::string format = "both";
  std::string mode = "all";

  void add(CLI::App& app) {
    paths.add_options(app, true);
    auto* r = app.add_flag("--rcp", rcp, "Rank with context persons (default)");
    app.add_flag("--baseline", baseline, "Rank by individual similarity only")->excludes(r);
    app.add_option("--lambda", params.lambda, "Context score weight");
    app.add_option("--threshold-b", params.b, "Context match gate");
    app.add_option("--iou-thresh", match.iou_threshold, "IoU needed for a true match");
    app.add_option("--fg-thresh", match.fg_score_threshold, "Minimum detection score");
    app.add_option("--gallery-size", gallery_size, "Evaluate on a seeded subset of this many gallery scenes");
    app.add_option("--seed", seed, "Seed for --gallery-size");
    app.add_option("--format", format, "human | machine | both")
        ->check(CLI::IsMember({"human", "machine", "both"}));
    app.add_option("--mode", mode, "Candidates: all | argmax (one per scene)");
  }

  int run(std::ostream& out, std::ostream& err) {
    if (gallery_size && !seed) throw ValidationError("--gallery-size requires --seed");
    const Dataset ds = load_dataset(paths, true);
    const GalleryIndex g = gallery_without_queries(ds, gallery_size, seed.value_or(0));
    std::vector<QuerySpec> queries;
    std::size_t dropped = 0;
    for (const auto& ref : ds.query_refs) {
      QuerySpec q = query_from_ref(ds, ref);
      if (gallery_size && gt_positives_for(q, g).empty()) {
        ++dropped;
        continue;
      }
      queries.push_back(std::move(q));
    }
    if (dropped) err << "note: " << dropped << " queries have no positive in the sampled gallery and were skipped\n";

    EvalOptions opt;
    opt.ranker = baseline ? Ranker::kBaseline : Ranker::kRcp;
    opt.params = params;
    opt.match = match;
    opt.mode = parse_mode(mode);
    const EvalResult res = evaluate(queries, g, opt);
    const char* ranker = baseline ? "baseline" : "rcp";
    if (format != "machine") {
      out << "ranker   " << ranker << "\n"
          << "queries  " << queries.size() << "\n"
          << "gallery  " << g.size() << " detections in " << g.scenes().size() << " scenes\n"
          << "mAP      " << fixed(100 * res.map, 2) << "%\n"
          << "top-1    " << fixed(100 * res.top_k(1), 2) << "%\n"
          << "top-5    " << fixed(100 * res.top_k(5), 2) << "%\n"
          << "top-10   " << fixed(100 * res.top_k(10), 2) << "%\n";
    }
    if (format != "human") {
      out << "map=" << fixed(res.map) << " top1=" << fixed(res.top_k(1)) << " top5=" << fixed(res.top_k(5))
          << " top10=" << fixed(res.top_k(10)) << " queries=" << queries.size() << " gallery=" << g.size()
          << " ranker=" << ranker << " lambda=" << fixed(params.lambda, 4) << " b=" << fixed(params.b, 4) << "\n";
    }
    return 0;
  }
};

// ---- distill-check --------------------------------------------------------

struct DistillCheckCmd {
  std::optional<std::uint64_t> seed;
  DistillConfig cfg;
  std::size_t d_in = 8;
  std::size_t dim = 8;
  std::size_t k = 32;
  int trace_every = 10;

  void add(CLI::App& app) {
    app.add_option("--seed", seed, "Random seed (required)")->required();
    app.add_option("--epochs", cfg.epochs);
    app.add_option("--lr", cfg.lr);
    app.add_option("--d-in", d_in);
    app.add_option("--dim", dim);
    app.add_option("--k", k, "RoIs in the batch");
    app.add_option("--trace-every", trace_every, "Print every n-th epoch of the trace");
  }

  int run(std::ostream& out, std::ostream& err) {
    Rng rng(*seed);
    auto gaussian = [&](std::size_t r, std::size_t c) {
      Matrix m(r, c);
      for (double& v : m.data()) v = rng.normal();
      return m;
    };
    // Gradient report on one random instance of every loss.
    const std::size_t classes = 5;
    LossBatch batch{gaussian(k, dim), normalize_rows(gaussian(k, dim)), {}, gaussian(k, classes)};
    for (std::size_t i = 0; i < k; ++i) {
      batch.labels.push_back(i % 3 == 0 ? kUnlabeledClass
                                        : ClassLabel(static_cast<std::size_t>(rng.uniform_int(0, classes - 1))));
    }
    auto away_from_kinks = [&](std::size_t r, std::size_t c) {
      Matrix m = gaussian(r, c);
      for (double& v : m.data()) {
        if (std::abs(std::abs(v) - 1.0) < 0.05) v += 0.1;
      }
      return m;
    };
    std::vector<std::size_t> rpn_y, roi_y;
    for (int i = 0; i < 6; ++i) rpn_y.push_back(static_cast<std::size_t>(rng.uniform_int(0, 1)));
    for (int i = 0; i < 6; ++i) roi_y.push_back(static_cast<std::size_t>(rng.uniform_int(0, 1)));
    DetLossInputs det{{gaussian(6, 2), rpn_y}, {away_from_kinks(6, 4), Matrix(6, 4)},
                      {gaussian(6, 2), roi_y}, {away_from_kinks(6, 4), Matrix(6, 4)}};
    const int epoch = 0;
    struct Check {
      const char* name;
      LossFn fn;
      ParamSet inputs;
    };
    const Check checks[] = {
        {"transfer_loss", [&](const ParamSet& p) { return transfer_loss(p.at("student_feats"), batch.teacher_feats); },
         {{"student_feats", batch.student_feats}}},
        {"cross_entropy", [&](const ParamSet& p) { return cross_entropy(p.at("logits"), batch.labels); },
         {{"logits", batch.logits}}},
        {"smooth_l1", [&](const ParamSet& p) { return smooth_l1(p.at("pred"), det.rpn_reg.target); },
         {{"pred", det.rpn_reg.pred}}},
        {"reid_loss", [&](const ParamSet& p) { return reid_loss(with_params(batch, p), epoch); }, params_of(batch)},
        {"total_loss",
         [&](const ParamSet& p) { return total_loss(with_params(batch, p), with_params(det, p), epoch); },
         [&] {
           ParamSet all = params_of(batch);
           all.merge(params_of(det));
           return all;
         }()},
    };
    for (const auto& c : checks) {
      const GradCheckResult r = grad_check(c.fn, c.inputs);
      char buf[160];
      std::snprintf(buf, sizeof buf, "gradcheck %-14s coords=%-4zu max_rel_error=%.3e", c.name, r.coordinates,
                    r.max_rel_error);
      out << buf << "\n";
    }

    const ToyDistillProblem problem = make_toy_problem(*seed, d_in, dim, k);
    try {
      const DistillResult res = distill_train(problem.student, problem.teacher_feats, problem.raw_inputs, cfg);
      for (std::size_t e = 0; e < res.transfer_trace.size(); ++e) {
        if (trace_every > 0 && (e % static_cast<std::size_t>(trace_every) == 0 || e + 1 == res.transfer_trace.size())) {
          out << "epoch=" << e << " w=" << fixed(weight_schedule(static_cast<int>(e)), 1)
              << " transfer=" << fixed(res.transfer_trace[e], 8) << " loss=" << fixed(res.loss_trace[e], 8) << "\n";
        }
      }
      out << "final_transfer=" << fixed(res.final_transfer_loss) << "\n";
    } catch (const DivergenceError& e) {
      err << "error: " << e.what() << "\n";
      return 3;
    }
    return 0;
  }
};

// ---- nms ------------------------------------------------------------------

struct NmsCmd {
  std::string input;
  std::string output;
  double iou_thresh = 0.5;

  void add(CLI::App& app) {
    app.add_option("--input", input, "Annotation file with scored boxes")->required();
    app.add_option("--out", output, "Write kept boxes here (default stdout)");
    app.add_option("--iou-thresh", iou_thresh, "Suppression IoU threshold");
  }

  int run(std::ostream& out) {
    std::vector<SceneRecord> scenes = load_annotations(input);
    for (auto& s : scenes) s.detections = nms(s.detections, iou_thresh);
    if (output.empty()) {
      write_annotations(out, scenes);
    } else {
      save_annotations(output, scenes);
    }
    return 0;
  }
};

}  // namespace

int run(const std::vector<std::string>& args, std::ostream& out, std::ostream& err) {
  CLI::App app{"Person search ranking, re-ranking with context persons, and evaluation"};
  app.require_subcommand(1);
  SimulateCmd simulate;
  BuildGalleryCmd build;
  SearchCmd search;
  EvaluateCmd evaluate_cmd;
  DistillCheckCmd distill;
  NmsCmd nms_cmd;
  auto* sim_app = app.add_subcommand("simulate", "Generate a synthetic co-traveller world");
  simulate.add(*sim_app);
  auto* build_app = app.add_subcommand("build-gallery", "Validate inputs and build a gallery index");
  build.add(*build_app);
  auto* search_app = app.add_subcommand("search", "Rank the gallery for one query");
  search.add(*search_app);
  auto* eval_app = app.add_subcommand("evaluate", "mAP and CMC over the query list");
  evaluate_cmd.add(*eval_app);
  auto* distill_app = app.add_subcommand("distill-check", "Gradient checks and toy distillation run");
  distill.add(*distill_app);
  auto* nms_app = app.add_subcommand("nms", "Non-maximum suppression over an annotation file");
  nms_cmd.add(*nms_app);

  std::vector<std::string> argv_store{"psearch"};
  argv_store.insert(argv_store.end(), args.begin(), args.end());
  std::vector<const char*> argv;
  for (const auto& a : argv_store) argv.push_back(a.c_str());

  try {
    app.parse(static_cast<int>(argv.size()), argv.data());
  } catch (const CLI::ParseError& e) {
    return app.exit(e, out, err);
  }

  try {
    if (*sim_app) return simulate.run(out);
    if (*build_app) return build.run(out);
    if (*search_app) return search.run(out);
    if (*eval_app) return evaluate_cmd.run(out, err);
    if (*distill_app) return distill.run(out, err);
    if (*nms_app) return nms_cmd.run(out);
  } catch (const std::exception& e) {
    err << "error: " << e.what() << "\n";
    return 1;
  }
  return 1;
}

std::map<std::string, std::string> parse_report_line(const std::string& line) {
  std::map<std::string, std::string> out;
  std::istringstream is(line);
  std::string tok;
  while (is >> tok) {
    const auto eq = tok.find('=');
    if (eq == std::string::npos) continue;
    out[tok.substr(0, eq)] = tok.substr(eq + 1);
  }
  return out;
}

}  // namespace psearch::cli

// dcin - dynamic color image normalization toolkit CLI.
//
// Subcommands: index-build, normalize, predict-eval, augment, loss.
// Every command is deterministic given its flags, inputs, and seeds; exit
// code 0 means zero per-item failures.

#include <cstdint>
#include <cstdio>
#include <filesystem>
#include <fstream>
#include <iostream>
#include <map>
#include <optional>
#include <string>
#include <vector>

#include <CLI11.hpp>

#include "dcin/dcin.hpp"

namespace fs = std::filesystem;

namespace {

std::optional<std::pair<int, int>> parse_resize(const std::string& text) {
  if (text.empty()) return std::nullopt;
  auto x = text.find('x');
  if (x == std::string::npos) throw dcin::ConfigError("--resize expects WIDTHxHEIGHT");
  int w = 0, h = 0;
  try {
    w = std::stoi(text.substr(0, x));
    h = std::stoi(text.substr(x + 1));
  } catch (const std::exception&) {
    throw dcin::ConfigError("--resize expects WIDTHxHEIGHT, got '" + text + "'");
  }
  if (w < 1 || h < 1) throw dcin::ConfigError("--resize dimensions must be >= 1");
  return std::make_pair(w, h);
}

/// "sub/img.png" -> "sub/img" (ids keep their directory part).
std::string stem_of(const std::string& id) {
  fs::path p(id);
  return (p.parent_path() / p.stem()).generic_string();
}

dcin::LossWeights parse_lambdas(const std::string& text) {
  dcin::LossWeights w;
  double a, b, c;
  if (std::sscanf(text.c_str(), "%lf,%lf,%lf", &a, &b, &c) != 3)
    throw dcin::ConfigError("--lambdas expects three comma-separated values");
  w.lambda1 = a;
  w.lambda2 = b;
  w.lambda3 = c;
  return w;
}

struct StrategyRequest {
  std::string name = "global";
  std::string reference_path;   // fixed only
  std::string embeddings_path;  // local/ensemble: per-test-image embeddings
};

bool strategy_needs_embedding(const std::string& name) {
  return name == "local" || name == "ensemble";
}

/// Resolves the CLI strategy flags into a library Strategy. For `fixed`,
/// the reference image is decoded once and reduced to its channel stats.
dcin::Strategy resolve_strategy(const StrategyRequest& req) {
  if (req.name == "global") return dcin::Strategy::global();
  if (req.name == "local") return dcin::Strategy::local();
  if (req.name == "ensemble") return dcin::Strategy::ensemble();
  if (req.name == "fixed") {
    if (req.reference_path.empty())
      throw dcin::ConfigError("--strategy fixed requires --reference");
    dcin::RgbImage ref = dcin::read_image(req.reference_path);
    return dcin::Strategy::fixed_reference(dcin::channel_stats(dcin::rgb_to_lab(ref)));
  }
  throw dcin::ConfigError("unknown strategy '" + req.name + "'");
}

std::map<std::string, dcin::EmbeddingVector> maybe_load_embeddings(
    const std::string& path, const std::string& strategy) {
  if (!strategy_needs_embedding(strategy)) return {};
  if (path.empty())
    throw dcin::ConfigError("--strategy " + strategy + " requires --embeddings");
  return dcin::load_embeddings(path);
}

/// Builds the predictor named by --predictor:
///   file:<dir>        precomputed DCIN-mask lookup by image id
///   const:<p0,p1,..>  fixed class distribution everywhere
///   anything else     external command `<cmd> <input.png> <output.dcm>`
std::unique_ptr<dcin::Predictor> make_predictor(const std::string& descriptor,
                                                double timeout_seconds) {
  if (descriptor.rfind("file:", 0) == 0) {
    return std::make_unique<dcin::FileLookupPredictor>(descriptor.substr(5));
  }
  if (descriptor.rfind("const:", 0) == 0) {
    std::vector<double> probs;
    std::string rest = descriptor.substr(6);
    std::size_t pos = 0;
    while (pos <= rest.size()) {
      std::size_t comma = rest.find(',', pos);
      std::string tok = rest.substr(pos, comma == std::string::npos ? comma : comma - pos);
      try {
        probs.push_back(std::stod(tok));
      } catch (const std::exception&) {
        throw dcin::ConfigError("const predictor expects comma-separated probabilities");
      }
      if (comma == std::string::npos) break;
      pos = comma + 1;
    }
    return std::make_unique<dcin::ConstantPredictor>(probs);
  }
  return std::make_unique<dcin::ExternalCommandPredictor>(descriptor, timeout_seconds);
}

struct ItemOutcome {
  bool ok = false;
  std::string message;
};

/// Prints per-item failures (in id order) and returns the failure count.
std::size_t report_failures(const std::vector<std::string>& ids,
                            const std::vector<ItemOutcome>& outcomes) {
  std::size_t failures = 0;
  for (std::size_t i = 0; i < ids.size(); ++i) {
    if (outcomes[i].ok) continue;
    ++failures;
    std::cerr << "error: " << ids[i] << ": " << outcomes[i].message << "\n";
  }
  return failures;
}

// ---------------------------------------------------------------------------
// index-build
// ---------------------------------------------------------------------------

int cmd_index_build(const std::string& images_dir, int bins, const std::string& embeddings,
                    const std::string& out, int jobs, const std::string& resize) {
  std::optional<fs::path> embeddings_path;
  if (!embeddings.empty()) embeddings_path = embeddings;

  dcin::BuildResult result =
      dcin::build_index(images_dir, bins, embeddings_path, jobs, parse_resize(resize));
  dcin::save_index(result.index, out);

  std::cout << "entries: " << result.index.entries.size() << "\n"
            << "global_reference: " << *result.index.global_reference_id << "\n"
            << "embeddings_matched: " << result.embeddings_matched << "\n";
  for (const auto& id : result.embeddings_unmatched)
    std::cerr << "warning: embedding id not in corpus: " << id << "\n";
  return 0;
}

// ---------------------------------------------------------------------------
// normalize
// ---------------------------------------------------------------------------

int cmd_normalize(const std::string& index_path, const StrategyRequest& req,
                  const std::string& input_dir, const std::string& out_dir, int jobs,
                  const std::string& resize) {
  dcin::ReferenceIndex index = dcin::load_index(index_path);
  dcin::Strategy strategy = resolve_strategy(req);
  auto embeddings = maybe_load_embeddings(req.embeddings_path, req.name);
  auto resize_to = parse_resize(resize);

  std::vector<std::string> ids = dcin::list_corpus_ids(input_dir);
  if (ids.empty()) throw dcin::IoError("no decodable images under " + input_dir);

  std::vector<ItemOutcome> outcomes(ids.size());
  dcin::parallel_for(ids.size(), jobs, [&](std::size_t i) {
    try {
      dcin::RgbImage img = dcin::read_image(fs::path(input_dir) / ids[i]);
      if (resize_to) img = dcin::resize_bilinear(img, resize_to->first, resize_to->second);

      std::optional<dcin::EmbeddingVector> embedding;
      if (strategy_needs_embedding(req.name)) {
        auto it = embeddings.find(ids[i]);
        if (it == embeddings.end())
          throw dcin::DataError("no embedding for id '" + ids[i] + "'");
        embedding = it->second;
      }

      std::vector<dcin::RgbImage> outputs = dcin::normalize(img, strategy, index, embedding);
      std::string stem = stem_of(ids[i]);
      if (outputs.size() == 1) {
        dcin::write_png_rgb(fs::path(out_dir) / (stem + ".png"), outputs[0]);
      } else {
        dcin::write_png_rgb(fs::path(out_dir) / (stem + ".global.png"), outputs[0]);
        dcin::write_png_rgb(fs::path(out_dir) / (stem + ".local.png"), outputs[1]);
      }
      outcomes[i].ok = true;
    } catch (const std::exception& e) {
      outcomes[i].message = e.what();
    }
  });

  std::size_t failures = report_failures(ids, outcomes);
  std::cout << "normalized: " << (ids.size() - failures) << "\n"
            << "failed: " << failures << "\n";
  return failures == 0 ? 0 : 1;
}

// ---------------------------------------------------------------------------
// predict-eval
// ---------------------------------------------------------------------------

int cmd_predict_eval(const std::string& index_path, const StrategyRequest& req,
                     const std::string& predictor_descriptor, double timeout,
                     const std::string& input_dir, const std::string& gt_dir,
                     const std::string& report_path, int jobs, const std::string& resize) {
  dcin::ReferenceIndex index = dcin::load_index(index_path);
  dcin::Strategy strategy = resolve_strategy(req);
  auto embeddings = maybe_load_embeddings(req.embeddings_path, req.name);
  auto resize_to = parse_resize(resize);
  std::unique_ptr<dcin::Predictor> predictor = make_predictor(predictor_descriptor, timeout);

  std::vector<std::string> ids = dcin::list_corpus_ids(input_dir);
  if (ids.empty()) throw dcin::IoError("no decodable images under " + input_dir);

  // Ground truth must be resolvable for every id before any prediction runs.
  std::vector<std::string> missing_gt;
  for (const auto& id : ids)
    if (!fs::exists(fs::path(gt_dir) / (stem_of(id) + ".png")))
      missing_gt.push_back(id);
  if (!missing_gt.empty()) {
    std::string msg = "missing ground truth for:";
    for (const auto& id : missing_gt) msg += " " + id;
    throw dcin::EvaluationError(msg);
  }

  std::vector<ItemOutcome> outcomes(ids.size());
  std::vector<dcin::LabelMask> predictions(ids.size());
  std::vector<dcin::LabelMask> ground_truths(ids.size());

  dcin::parallel_for(ids.size(), jobs, [&](std::size_t i) {
    try {
      const std::string& id = ids[i];
      dcin::RgbImage img = dcin::read_image(fs::path(input_dir) / id);
      dcin::LabelMask gt = dcin::read_png_mask(fs::path(gt_dir) / (stem_of(id) + ".png"));
      if (resize_to) {
        img = dcin::resize_bilinear(img, resize_to->first, resize_to->second);
        gt = dcin::resize_nearest(gt, resize_to->first, resize_to->second);
      }

      std::optional<dcin::EmbeddingVector> embedding;
      if (strategy_needs_embedding(req.name)) {
        auto it = embeddings.find(id);
        if (it == embeddings.end())
          throw dcin::DataError("no embedding for id '" + id + "'");
        embedding = it->second;
      }

      dcin::LabelMask labels;
      if (req.name == "ensemble") {
        labels = dcin::ensemble_predict(img, index, *embedding, *predictor, id).labels;
      } else {
        dcin::RgbImage normalized = dcin::normalize(img, strategy, index, embedding)[0];
        dcin::ProbMask mask = predictor->predict(normalized, id);
        dcin::check_valid(mask, "prediction");
        if (mask.width != img.width || mask.height != img.height)
          throw dcin::PredictionError("prediction dimensions mismatch for '" + id + "'");
        labels = dcin::argmax_labels(mask);
      }
      predictions[i] = std::move(labels);
      ground_truths[i] = std::move(gt);
      outcomes[i].ok = true;
    } catch (const std::exception& e) {
      outcomes[i].message = e.what();
    }
  });

  std::size_t failures = report_failures(ids, outcomes);
  std::map<std::string, dcin::LabelMask> pred_map, gt_map;
  for (std::size_t i = 0; i < ids.size(); ++i) {
    if (!outcomes[i].ok) continue;
    pred_map.emplace(ids[i], std::move(predictions[i]));
    gt_map.emplace(ids[i], std::move(ground_truths[i]));
  }
  if (pred_map.empty()) throw dcin::EvaluationError("every prediction failed");

  dcin::EvaluationReport report = dcin::evaluate_dataset(pred_map, gt_map);
  fs::path out(report_path);
  if (!out.parent_path().empty()) fs::create_directories(out.parent_path());
  std::ofstream file(out, std::ios::trunc);
  if (!file) throw dcin::IoError("cannot write report to " + report_path);
  file << dcin::report_to_json(report).dump(2) << "\n";

  std::cout << "mean_dice: " << report.mean_dice << "\n"
            << "evaluated: " << pred_map.size() << "\n"
            << "failed: " << failures << "\n";
  return failures == 0 ? 0 : 1;
}

// ---------------------------------------------------------------------------
// augment
// ---------------------------------------------------------------------------

int cmd_augment(const std::string& image_path, const std::string& mask_path,
                std::uint64_t seed, const std::string& config_path,
                const std::string& out_dir) {
  dcin::RgbImage image = dcin::read_image(image_path);
  dcin::LabelMask mask = dcin::read_png_mask(mask_path);
  dcin::AugmentConfig config =
      config_path.empty() ? dcin::AugmentConfig{} : dcin::load_augment_config(config_path);

  dcin::CqgPair pair = dcin::make_cqg_pair(image, mask, seed, config);

  fs::create_directories(out_dir);
  dcin::write_png_rgb(fs::path(out_dir) / "x1.png", pair.x1);
  dcin::write_png_rgb(fs::path(out_dir) / "x2.png", pair.x2);
  dcin::write_png_mask(fs::path(out_dir) / "y.png", pair.y);
  std::ofstream params(fs::path(out_dir) / "params.json", std::ios::trunc);
  params << dcin::params_to_json(pair.geometric, pair.photometric).dump(2) << "\n";

  std::cout << "seed: " << seed << "\n"
            << "wrote: x1.png x2.png y.png params.json\n";
  return 0;
}

// ---------------------------------------------------------------------------
// loss
// ---------------------------------------------------------------------------

int cmd_loss(const std::string& gt_path, const std::string& pred1_path,
             const std::string& pred2_path, const std::string& lambdas) {
  dcin::LabelMask gt = dcin::read_png_mask(gt_path);
  dcin::ProbMask pred1 = dcin::read_prob_mask(pred1_path);
  dcin::ProbMask pred2 = dcin::read_prob_mask(pred2_path);
  dcin::LossWeights weights = parse_lambdas(lambdas);

  dcin::LossBreakdown b = dcin::cqg_loss(pred1, pred2, gt, weights);
  std::printf("dice1 %.12g\n", b.dice1);
  std::printf("ce1 %.12g\n", b.ce1);
  std::printf("dice2 %.12g\n", b.dice2);
  std::printf("ce2 %.12g\n", b.ce2);
  std::printf("mse %.12g\n", b.mse);
  std::printf("total %.12g\n", b.total);
  return 0;
}

}  // namespace

int main(int argc, char** argv) {
  CLI::App app{"dcin - dynamic color image normalization toolkit"};
  app.require_subcommand(1);

  // index-build
  std::string ib_images, ib_embeddings, ib_out, ib_resize;
  int ib_bins = 8, ib_jobs = 0;
  CLI::App* index_build =
      app.add_subcommand("index-build", "Build a reference index from an image corpus");
  index_build->add_option("--images", ib_images, "Image corpus directory")
      ->required()
      ->check(CLI::ExistingDirectory);
  index_build->add_option("--bins", ib_bins, "Histogram bins per channel (default 8)");
  index_build->add_option("--embeddings", ib_embeddings,
                          "JSONL embedding file to attach by image id");
  index_build->add_option("--out", ib_out, "Output index file")->required();
  index_build->add_option("--jobs", ib_jobs, "Worker threads (default: DCIN_JOBS or cores)");
  index_build->add_option("--resize", ib_resize, "Resize images to WxH before indexing");

  // normalize
  std::string nm_index, nm_input, nm_out, nm_resize;
  StrategyRequest nm_req;
  int nm_jobs = 0;
  CLI::App* normalize_cmd =
      app.add_subcommand("normalize", "Color-normalize test images against an index");
  normalize_cmd->add_option("--index", nm_index, "Index file")->required();
  normalize_cmd->add_option("--strategy", nm_req.name, "global|local|ensemble|fixed")
      ->required()
      ->check(CLI::IsMember({"global", "local", "ensemble", "fixed"}));
  normalize_cmd->add_option("--reference", nm_req.reference_path,
                            "Reference image (fixed strategy)");
  normalize_cmd->add_option("--embeddings", nm_req.embeddings_path,
                            "JSONL test-image embeddings (local/ensemble)");
  normalize_cmd->add_option("--input", nm_input, "Input image directory")
      ->required()
      ->check(CLI::ExistingDirectory);
  normalize_cmd->add_option("--out", nm_out, "Output directory")->required();
  normalize_cmd->add_option("--jobs", nm_jobs, "Worker threads");
  normalize_cmd->add_option("--resize", nm_resize, "Resize inputs to WxH first");

  // predict-eval
  std::string pe_index, pe_predictor, pe_input, pe_gt, pe_report, pe_resize;
  StrategyRequest pe_req;
  int pe_jobs = 0;
  double pe_timeout = 60.0;
  CLI::App* predict_eval = app.add_subcommand(
      "predict-eval", "Normalize, predict, ensemble, and score against ground truth");
  predict_eval->add_option("--index", pe_index, "Index file")->required();
  predict_eval->add_option("--strategy", pe_req.name, "global|local|ensemble|fixed")
      ->required()
      ->check(CLI::IsMember({"global", "local", "ensemble", "fixed"}));
  predict_eval->add_option("--reference", pe_req.reference_path,
                           "Reference image (fixed strategy)");
  predict_eval->add_option("--embeddings", pe_req.embeddings_path,
                           "JSONL test-image embeddings (local/ensemble)");
  predict_eval->add_option("--predictor", pe_predictor,
                           "Predictor: external command, file:<dir>, or const:<p0,p1,...>")
      ->required();
  predict_eval->add_option("--timeout", pe_timeout,
                           "External predictor timeout in seconds (default 60)");
  predict_eval->add_option("--input", pe_input, "Test image directory")
      ->required()
      ->check(CLI::ExistingDirectory);
  predict_eval->add_option("--gt", pe_gt, "Ground-truth mask directory")
      ->required()
      ->check(CLI::ExistingDirectory);
  predict_eval->add_option("--report", pe_report, "Output JSON report path")->required();
  predict_eval->add_option("--jobs", pe_jobs, "Worker threads");
  predict_eval->add_option("--resize", pe_resize, "Resize inputs and masks to WxH first");

  // augment
  std::string ag_image, ag_mask, ag_config, ag_out;
  std::uint64_t ag_seed = 0;
  CLI::App* augment =
      app.add_subcommand("augment", "Generate a color-quality training pair (x1, x2, y)");
  augment->add_option("--image", ag_image, "Input image")->required()
      ->check(CLI::ExistingFile);
  augment->add_option("--mask", ag_mask, "Ground-truth mask (gray PNG)")
      ->required()
      ->check(CLI::ExistingFile);
  augment->add_option("--seed", ag_seed, "Sampling seed")->required();
  augment->add_option("--config", ag_config, "Augmentation config JSON");
  augment->add_option("--out", ag_out, "Output directory")->required();

  // loss
  std::string ls_gt, ls_pred1, ls_pred2, ls_lambdas = "0.3,0.7,1.0";
  CLI::App* loss = app.add_subcommand("loss", "Evaluate the CQG loss on stored masks");
  loss->add_option("--gt", ls_gt, "Ground-truth mask (gray PNG)")->required()
      ->check(CLI::ExistingFile);
  loss->add_option("--pred1", ls_pred1, "First DCIN-mask file")->required()
      ->check(CLI::ExistingFile);
  loss->add_option("--pred2", ls_pred2, "Second DCIN-mask file")->required()
      ->check(CLI::ExistingFile);
  loss->add_option("--lambdas", ls_lambdas, "Loss weights a,b,c (default 0.3,0.7,1.0)");

  CLI11_PARSE(app, argc, argv);

  try {
    if (*index_build)
      return cmd_index_build(ib_images, ib_bins, ib_embeddings, ib_out, ib_jobs, ib_resize);
    if (*normalize_cmd)
      return cmd_normalize(nm_index, nm_req, nm_input, nm_out, nm_jobs, nm_resize);
    if (*predict_eval)
      return cmd_predict_eval(pe_index, pe_req, pe_predictor, pe_timeout, pe_input, pe_gt,
                              pe_report, pe_jobs, pe_resize);
    if (*augment) return cmd_augment(ag_image, ag_mask, ag_seed, ag_config, ag_out);
    if (*loss) return cmd_loss(ls_gt, ls_pred1, ls_pred2, ls_lambdas);
  } catch (const std::exception& e) {
    std::cerr << "error: " << e.what() << "\n";
    return 1;
  }
  return 0;
}

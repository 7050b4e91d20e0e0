#pragma once

#include <atomic>
#include <chrono>
#include <cstdint>
#include <filesystem>
#include <map>
#include <optional>
#include <sstream>
#include <string>
#include <thread>
#include <utility>
#include <vector>

#include <signal.h>
#include <spawn.h>
#include <sys/wait.h>
#include <unistd.h>

#include <json.hpp>

#include "dcin/colorspace.hpp"
#include "dcin/error.hpp"
#include "dcin/image.hpp"
#include "dcin/image_io.hpp"
#include "dcin/loss.hpp"
#include "dcin/reference_index.hpp"

extern "C" char** environ;

namespace dcin {

// ---------------------------------------------------------------------------
// Normalization strategies
// ---------------------------------------------------------------------------

enum class StrategyKind { kGlobal, kLocal, kEnsemble, kFixed };

/// Reference selection strategy. `fixed` resolves either to an index entry
/// (by id) or to externally supplied reference statistics.
struct Strategy {
  StrategyKind kind = StrategyKind::kGlobal;
  std::string fixed_id;
  std::optional<ChannelStats> fixed_stats;

  static Strategy global() { return {StrategyKind::kGlobal, {}, {}}; }
  static Strategy local() { return {StrategyKind::kLocal, {}, {}}; }
  static Strategy ensemble() { return {StrategyKind::kEnsemble, {}, {}}; }
  static Strategy fixed_entry(std::string id) {
    return {StrategyKind::kFixed, std::move(id), {}};
  }
  static Strategy fixed_reference(const ChannelStats& stats) {
    return {StrategyKind::kFixed, {}, stats};
  }
};

namespace detail {

inline const ChannelStats& resolve_reference_stats(const Strategy& strategy,
                                                   const ReferenceIndex& index,
                                                   const std::optional<EmbeddingVector>&
                                                       test_embedding) {
  switch (strategy.kind) {
    case StrategyKind::kGlobal: {
      if (index.entries.empty()) throw UsageError("normalize: empty index");
      if (!index.global_reference_id)
        throw UsageError("normalize: index has no cached global reference id");
      const IndexEntry* entry = index.find(*index.global_reference_id);
      if (!entry)
        throw UsageError("normalize: cached global reference '" +
                         *index.global_reference_id + "' names no entry");
      return entry->lab_stats;
    }
    case StrategyKind::kLocal: {
      if (index.entries.empty()) throw UsageError("normalize: empty index");
      if (!test_embedding)
        throw UsageError("normalize: local strategy requires a test embedding");
      const IndexEntry* entry = index.find(select_local_reference(*test_embedding, index));
      return entry->lab_stats;
    }
    case StrategyKind::kFixed: {
      if (strategy.fixed_stats) return *strategy.fixed_stats;
      const IndexEntry* entry = index.find(strategy.fixed_id);
      if (!entry)
        throw UsageError("normalize: fixed reference '" + strategy.fixed_id +
                         "' names no index entry");
      return entry->lab_stats;
    }
    case StrategyKind::kEnsemble:
      break;
  }
  throw UsageError("normalize: ensemble strategy has no single reference");
}

}  // namespace detail

/// Color-normalizes a test image. Returns one image for global/local/fixed;
/// for ensemble, two images (global-normalized, then local-normalized) that
/// match the single-strategy outputs bit for bit.
inline std::vector<RgbImage> normalize(const RgbImage& test, const Strategy& strategy,
                                       const ReferenceIndex& index,
                                       const std::optional<EmbeddingVector>& test_embedding =
                                           std::nullopt) {
  if (strategy.kind == StrategyKind::kEnsemble) {
    std::vector<RgbImage> out;
    out.push_back(normalize(test, Strategy::global(), index, test_embedding)[0]);
    out.push_back(normalize(test, Strategy::local(), index, test_embedding)[0]);
    return out;
  }
  const ChannelStats& ref = detail::resolve_reference_stats(strategy, index, test_embedding);
  std::vector<RgbImage> out;
  out.push_back(reinhard_transfer(test, ref));
  return out;
}

// ---------------------------------------------------------------------------
// Predictor boundary
// ---------------------------------------------------------------------------

/// Abstract segmentation model: RgbImage -> ProbMask. `tag` identifies the
/// work item for diagnostics and file lookup.
class Predictor {
 public:
  virtual ~Predictor() = default;
  virtual ProbMask predict(const RgbImage& image, const std::string& tag) = 0;
};

/// Test stub: the same class distribution at every pixel.
class ConstantPredictor : public Predictor {
 public:
  explicit ConstantPredictor(std::vector<double> class_probs)
      : probs_(std::move(class_probs)) {
    if (probs_.size() < 2) throw UsageError("ConstantPredictor needs >= 2 classes");
    double sum = 0.0;
    for (double p : probs_) sum += p;
    if (std::abs(sum - 1.0) > 1e-9)
      throw UsageError("ConstantPredictor probabilities must sum to 1");
  }

  ProbMask predict(const RgbImage& image, const std::string&) override {
    ProbMask mask(image.width, image.height, static_cast<int>(probs_.size()));
    for (std::size_t i = 0; i < mask.pixel_count(); ++i)
      for (std::size_t c = 0; c < probs_.size(); ++c)
        mask.data[i * probs_.size() + c] = probs_[c];
    return mask;
  }

 private:
  std::vector<double> probs_;
};

/// Reads precomputed DCIN-mask files named `<tag>.dcm` from a directory.
class FileLookupPredictor : public Predictor {
 public:
  explicit FileLookupPredictor(std::filesystem::path mask_dir)
      : dir_(std::move(mask_dir)) {}

  ProbMask predict(const RgbImage& image, const std::string& tag) override {
    std::filesystem::path path = dir_ / (tag + ".dcm");
    ProbMask mask;
    try {
      mask = read_prob_mask(path);
    } catch (const Error& e) {
      throw PredictionError("prediction lookup failed for '" + tag + "': " + e.what());
    }
    if (mask.width != image.width || mask.height != image.height)
      throw PredictionError("prediction for '" + tag + "' has mismatched dimensions");
    return mask;
  }

 private:
  std::filesystem::path dir_;
};

/// Runs an external executable per image: `<cmd...> <input.png> <output.dcm>`.
/// The command must exit 0 within the timeout and write a DCIN-mask file.
/// Thread safe; concurrent calls use distinct temp file names.
class ExternalCommandPredictor : public Predictor {
 public:
  explicit ExternalCommandPredictor(const std::string& command,
                                    double timeout_seconds = 60.0)
      : timeout_(timeout_seconds) {
    std::istringstream words(command);
    std::string w;
    while (words >> w) argv_prefix_.push_back(w);
    if (argv_prefix_.empty()) throw ConfigError("predictor command is empty");

    std::string tmpl =
        (std::filesystem::temp_directory_path() / "dcin-pred-XXXXXX").string();
    std::vector<char> buf(tmpl.begin(), tmpl.end());
    buf.push_back('\0');
    if (!mkdtemp(buf.data())) throw IoError("cannot create predictor temp directory");
    workdir_ = buf.data();
  }

  ~ExternalCommandPredictor() override {
    std::error_code ec;
    std::filesystem::remove_all(workdir_, ec);
  }

  ProbMask predict(const RgbImage& image, const std::string& tag) override {
    const std::uint64_t n = counter_.fetch_add(1);
    std::filesystem::path in_path = workdir_ / ("in_" + std::to_string(n) + ".png");
    std::filesystem::path out_path = workdir_ / ("out_" + std::to_string(n) + ".dcm");
    write_png_rgb(in_path, image);

    int exit_code = run_with_timeout(in_path.string(), out_path.string(), tag);
    if (exit_code != 0) {
      cleanup(in_path, out_path);
      throw PredictionError("predictor exited with status " + std::to_string(exit_code) +
                            " for '" + tag + "'");
    }

    ProbMask mask;
    try {
      mask = read_prob_mask(out_path);
    } catch (const Error& e) {
      cleanup(in_path, out_path);
      throw PredictionError("predictor wrote a malformed mask for '" + tag +
                            "': " + e.what());
    }
    cleanup(in_path, out_path);
    if (mask.width != image.width || mask.height != image.height)
      throw PredictionError("predictor mask for '" + tag + "' has mismatched dimensions");

    int expected = expected_classes_.load();
    if (expected == 0) expected_classes_.compare_exchange_strong(expected, mask.classes);
    if (expected != 0 && mask.classes != expected)
      throw PredictionError("predictor mask for '" + tag + "' has " +
                            std::to_string(mask.classes) + " classes, expected " +
                            std::to_string(expected));
    return mask;
  }

 private:
  static void cleanup(const std::filesystem::path& a, const std::filesystem::path& b) {
    std::error_code ec;
    std::filesystem::remove(a, ec);
    std::filesystem::remove(b, ec);
  }

  int run_with_timeout(const std::string& in_path, const std::string& out_path,
                       const std::string& tag) {
    std::vector<std::string> args = argv_prefix_;
    args.push_back(in_path);
    args.push_back(out_path);
    std::vector<char*> argv;
    argv.reserve(args.size() + 1);
    for (auto& a : args) argv.push_back(a.data());
    argv.push_back(nullptr);

    pid_t pid = -1;
    int rc = posix_spawnp(&pid, argv[0], nullptr, nullptr, argv.data(), environ);
    if (rc != 0)
      throw PredictionError("cannot launch predictor '" + argv_prefix_[0] + "' for '" +
                            tag + "'");

    const auto deadline =
        std::chrono::steady_clock::now() +
        std::chrono::duration_cast<std::chrono::steady_clock::duration>(
            std::chrono::duration<double>(timeout_));
    for (;;) {
      int status = 0;
      pid_t done = waitpid(pid, &status, WNOHANG);
      if (done == pid) {
        if (WIFEXITED(status)) return WEXITSTATUS(status);
        return 128 + (WIFSIGNALED(status) ? WTERMSIG(status) : 0);
      }
      if (done < 0) throw PredictionError("waitpid failed for '" + tag + "'");
      if (std::chrono::steady_clock::now() >= deadline) {
        kill(pid, SIGKILL);
        waitpid(pid, &status, 0);
        throw PredictionError("predictor timed out after " + std::to_string(timeout_) +
                              "s for '" + tag + "'");
      }
      std::this_thread::sleep_for(std::chrono::milliseconds(2));
    }
  }

  std::vector<std::string> argv_prefix_;
  double timeout_;
  std::filesystem::path workdir_;
  std::atomic<std::uint64_t> counter_{0};
  std::atomic<int> expected_classes_{0};
};

// ---------------------------------------------------------------------------
// Ensemble prediction
// ---------------------------------------------------------------------------

/// Per-pixel argmax; probability ties resolve to the lowest class index.
inline LabelMask argmax_labels(const ProbMask& mask) {
  check_valid(mask);
  if (mask.classes > 256)
    throw UsageError("argmax_labels: label masks hold at most 256 classes");
  LabelMask labels(mask.width, mask.height);
  for (std::size_t i = 0; i < mask.pixel_count(); ++i) {
    int best = 0;
    double best_p = mask.data[i * mask.classes];
    for (int c = 1; c < mask.classes; ++c) {
      double p = mask.data[i * mask.classes + c];
      if (p > best_p) {
        best = c;
        best_p = p;
      }
    }
    labels.data[i] = static_cast<std::uint8_t>(best);
  }
  return labels;
}

struct EnsembleResult {
  ProbMask mean;
  LabelMask labels;
};

/// Full-DCIN prediction: normalize onto the global and local references,
/// predict both, and average the two masks pixel-wise.
inline EnsembleResult ensemble_predict(const RgbImage& test, const ReferenceIndex& index,
                                       const EmbeddingVector& test_embedding,
                                       Predictor& predictor,
                                       const std::string& tag = "test") {
  std::vector<RgbImage> normalized =
      normalize(test, Strategy::ensemble(), index, test_embedding);
  ProbMask p1 = predictor.predict(normalized[0], tag + ".global");
  ProbMask p2 = predictor.predict(normalized[1], tag + ".local");
  check_valid(p1, "global prediction");
  check_valid(p2, "local prediction");
  if (p1.width != test.width || p1.height != test.height ||
      p2.width != test.width || p2.height != test.height)
    throw PredictionError("prediction dimensions do not match the test image for '" +
                          tag + "'");
  if (p1.classes != p2.classes)
    throw PredictionError("ensemble predictions disagree on class count for '" + tag +
                          "'");

  EnsembleResult result;
  result.mean = ProbMask(p1.width, p1.height, p1.classes);
  for (std::size_t i = 0; i < p1.data.size(); ++i)
    result.mean.data[i] = 0.5 * (p1.data[i] + p2.data[i]);
  result.labels = argmax_labels(result.mean);
  return result;
}

// ---------------------------------------------------------------------------
// Dataset evaluation
// ---------------------------------------------------------------------------

struct EvaluationReport {
  struct PerImage {
    std::string id;
    double dice = 0.0;
  };
  std::vector<PerImage> per_image;  // ordered by id
  double mean_dice = 0.0;
  std::map<int, double> per_class;  // mean per-image dice of classes that scored
};

/// Scores predictions against ground truths by id: per-image Dice, the
/// per-image average, and a per-class breakdown.
inline EvaluationReport evaluate_dataset(const std::map<std::string, LabelMask>& predictions,
                                         const std::map<std::string, LabelMask>& ground_truths) {
  std::vector<std::string> missing;
  for (const auto& [id, gt] : ground_truths)
    if (!predictions.count(id)) missing.push_back("prediction missing for '" + id + "'");
  for (const auto& [id, pred] : predictions)
    if (!ground_truths.count(id)) missing.push_back("ground truth missing for '" + id + "'");
  if (!missing.empty()) {
    std::string msg = "evaluate_dataset:";
    for (const auto& m : missing) msg += " " + m + ";";
    throw EvaluationError(msg);
  }
  if (predictions.empty()) throw EvaluationError("evaluate_dataset: no images");

  EvaluationReport report;
  std::map<int, std::pair<double, std::size_t>> class_acc;  // class -> (sum, count)
  double sum = 0.0;
  for (const auto& [id, pred] : predictions) {
    const LabelMask& gt = ground_truths.at(id);
    if (pred.width != gt.width || pred.height != gt.height)
      throw EvaluationError("evaluate_dataset: dimensions differ for '" + id + "'");
    std::map<int, double> per_class = dice_per_class(pred, gt);
    double dice = 0.0;
    for (const auto& [c, d] : per_class) {
      dice += d;
      auto& [s, n] = class_acc[c];
      s += d;
      ++n;
    }
    dice /= static_cast<double>(per_class.size());
    report.per_image.push_back({id, dice});
    sum += dice;
  }
  report.mean_dice = sum / static_cast<double>(report.per_image.size());
  for (const auto& [c, acc] : class_acc)
    report.per_class[c] = acc.first / static_cast<double>(acc.second);
  return report;
}

inline nlohmann::json report_to_json(const EvaluationReport& report) {
  nlohmann::json j;
  j["per_image"] = nlohmann::json::array();
  for (const auto& item : report.per_image)
    j["per_image"].push_back({{"id", item.id}, {"dice", item.dice}});
  j["mean_dice"] = report.mean_dice;
  nlohmann::json per_class = nlohmann::json::object();
  for (const auto& [c, d] : report.per_class) per_class[std::to_string(c)] = d;
  j["per_class"] = per_class;
  return j;
}

}  // namespace dcin

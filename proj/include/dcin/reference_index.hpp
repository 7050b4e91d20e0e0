#pragma once

#include <algorithm>
#include <cmath>
#include <cstdint>
#include <filesystem>
#include <fstream>
#include <map>
#include <numeric>
#include <optional>
#include <string>
#include <utility>
#include <vector>

#include <json.hpp>

#include "dcin/colorspace.hpp"
#include "dcin/error.hpp"
#include "dcin/image.hpp"
#include "dcin/image_io.hpp"
#include "dcin/parallel.hpp"

namespace dcin {

// ---------------------------------------------------------------------------
// Retrieval keys
// ---------------------------------------------------------------------------

/// Concatenated per-channel color histogram (R bins, G bins, B bins),
/// jointly normalized so the full 3*b vector sums to 1.
struct HistogramVector {
  int bins_per_channel = 0;
  std::vector<double> values;

  bool operator==(const HistogramVector&) const = default;
};

/// Unit-length feature vector. Producers are opaque to the toolkit; only
/// per-index dimensional consistency is required.
struct EmbeddingVector {
  std::vector<double> values;

  bool operator==(const EmbeddingVector&) const = default;
};

inline void check_bins(int bins_per_channel) {
  if (bins_per_channel < 2 || bins_per_channel > 256 || 256 % bins_per_channel != 0)
    throw ConfigError("bins_per_channel must be in [2,256] and divide 256 evenly, got " +
                      std::to_string(bins_per_channel));
}

inline HistogramVector compute_histogram(const RgbImage& image, int bins_per_channel) {
  check_bins(bins_per_channel);
  check_valid(image);
  const int b = bins_per_channel;
  HistogramVector hist;
  hist.bins_per_channel = b;
  hist.values.assign(static_cast<std::size_t>(3) * b, 0.0);

  std::vector<std::size_t> counts(static_cast<std::size_t>(3) * b, 0);
  const std::size_t n = image.pixel_count();
  for (std::size_t i = 0; i < n; ++i)
    for (int c = 0; c < 3; ++c)
      ++counts[static_cast<std::size_t>(c) * b + image.data[i * 3 + c] * b / 256];

  const double total = static_cast<double>(3 * n);
  for (std::size_t k = 0; k < counts.size(); ++k)
    hist.values[k] = static_cast<double>(counts[k]) / total;
  return hist;
}

/// Euclidean distance over the full concatenated histogram vector.
inline double histogram_distance(const HistogramVector& a, const HistogramVector& b) {
  if (a.values.size() != b.values.size())
    throw UsageError("histogram length mismatch: " + std::to_string(a.values.size()) +
                     " vs " + std::to_string(b.values.size()));
  double sq = 0.0;
  for (std::size_t k = 0; k < a.values.size(); ++k) {
    double d = a.values[k] - b.values[k];
    sq += d * d;
  }
  return std::sqrt(sq);
}

/// Scales a raw feature vector to unit length. Zero (or numerically zero)
/// vectors are data errors; `context` names the offending record.
inline EmbeddingVector normalize_embedding(const std::vector<double>& raw,
                                           const std::string& context) {
  double sq = 0.0;
  for (double v : raw) {
    if (!std::isfinite(v)) throw DataError("non-finite embedding value for " + context);
    sq += v * v;
  }
  double norm = std::sqrt(sq);
  if (!(norm > 1e-12)) throw DataError("zero-norm embedding for " + context);
  EmbeddingVector e;
  e.values.resize(raw.size());
  for (std::size_t i = 0; i < raw.size(); ++i) e.values[i] = raw[i] / norm;
  return e;
}

inline double cosine_similarity(const EmbeddingVector& a, const EmbeddingVector& b) {
  if (a.values.size() != b.values.size())
    throw UsageError("embedding dimension mismatch: " + std::to_string(a.values.size()) +
                     " vs " + std::to_string(b.values.size()));
  // Unit vectors by construction, so the dot product is the cosine.
  double dot = 0.0;
  for (std::size_t i = 0; i < a.values.size(); ++i) dot += a.values[i] * b.values[i];
  return dot;
}

// ---------------------------------------------------------------------------
// Index
// ---------------------------------------------------------------------------

struct IndexEntry {
  std::string id;  // relative image path within the corpus
  bool gris_eligible = true;
  HistogramVector histogram;
  ChannelStats lab_stats;
  std::optional<EmbeddingVector> embedding;
};

struct ReferenceIndex {
  static constexpr int kFormatVersion = 1;

  int format_version = kFormatVersion;
  int bins_per_channel = 8;
  std::vector<IndexEntry> entries;
  std::optional<std::string> global_reference_id;

  const IndexEntry* find(const std::string& id) const {
    for (const auto& e : entries)
      if (e.id == id) return &e;
    return nullptr;
  }
};

namespace detail {

/// Entry indices canonically ordered by id; keeps selection results
/// independent of entry storage order (sums accumulate identically).
inline std::vector<std::size_t> id_sorted_order(const ReferenceIndex& index) {
  std::vector<std::size_t> order(index.entries.size());
  std::iota(order.begin(), order.end(), std::size_t{0});
  std::sort(order.begin(), order.end(), [&](std::size_t a, std::size_t b) {
    return index.entries[a].id < index.entries[b].id;
  });
  return order;
}

}  // namespace detail

/// GRIS: the eligible entry whose histogram minimizes the average pairwise
/// Euclidean distance to all eligible entries (a medoid; the included
/// self-distance is zero and cannot change the argmin). Ties break toward
/// the lexicographically smallest id. The result is cached on the index.
inline std::string select_global_reference(ReferenceIndex& index, int jobs = 1) {
  std::vector<std::size_t> order = detail::id_sorted_order(index);
  std::erase_if(order, [&](std::size_t i) { return !index.entries[i].gris_eligible; });
  if (order.empty())
    throw UsageError("select_global_reference: no GRIS-eligible entries in index");

  const std::size_t expected = static_cast<std::size_t>(3) * index.bins_per_channel;
  for (std::size_t i : order)
    if (index.entries[i].histogram.values.size() != expected)
      throw UsageError("select_global_reference: non-uniform histogram bins at entry " +
                       index.entries[i].id);

  const std::size_t n = order.size();
  std::vector<double> pairwise_sum(n, 0.0);
  parallel_for(n, jobs, [&](std::size_t i) {
    const auto& hi = index.entries[order[i]].histogram;
    double sum = 0.0;
    for (std::size_t j = 0; j < n; ++j)
      sum += histogram_distance(hi, index.entries[order[j]].histogram);
    pairwise_sum[i] = sum;
  });

  std::size_t best = 0;
  for (std::size_t i = 1; i < n; ++i)
    if (pairwise_sum[i] < pairwise_sum[best]) best = i;

  std::string id = index.entries[order[best]].id;
  index.global_reference_id = id;
  return id;
}

/// LRIS: the entry whose embedding has the highest cosine similarity with
/// the test embedding. Entries without embeddings are skipped; ties break
/// toward the lexicographically smallest id.
inline std::string select_local_reference(const EmbeddingVector& test_embedding,
                                          const ReferenceIndex& index) {
  std::vector<std::size_t> order = detail::id_sorted_order(index);
  const IndexEntry* best = nullptr;
  double best_sim = 0.0;
  for (std::size_t i : order) {
    const auto& entry = index.entries[i];
    if (!entry.embedding) continue;
    double sim = cosine_similarity(test_embedding, *entry.embedding);
    if (!best || sim > best_sim) {
      best = &entry;
      best_sim = sim;
    }
  }
  if (!best) throw UsageError("select_local_reference: index has no embeddings");
  return best->id;
}

// ---------------------------------------------------------------------------
// Persistence (versioned UTF-8 JSON)
// ---------------------------------------------------------------------------

inline nlohmann::json index_to_json(const ReferenceIndex& index) {
  nlohmann::json j;
  j["format_version"] = index.format_version;
  j["bins_per_channel"] = index.bins_per_channel;
  if (index.global_reference_id)
    j["global_reference_id"] = *index.global_reference_id;
  else
    j["global_reference_id"] = nullptr;
  nlohmann::json entries = nlohmann::json::array();
  for (const auto& e : index.entries) {
    nlohmann::json je;
    je["id"] = e.id;
    je["gris_eligible"] = e.gris_eligible;
    je["histogram"] = e.histogram.values;
    je["lab_mean"] = e.lab_stats.mean;
    je["lab_std"] = e.lab_stats.std;
    if (e.embedding)
      je["embedding"] = e.embedding->values;
    else
      je["embedding"] = nullptr;
    entries.push_back(std::move(je));
  }
  j["entries"] = std::move(entries);
  return j;
}

inline void save_index(const ReferenceIndex& index, const std::filesystem::path& path) {
  std::filesystem::path parent = path.parent_path();
  if (!parent.empty()) std::filesystem::create_directories(parent);
  std::ofstream out(path, std::ios::binary | std::ios::trunc);
  if (!out) throw IoError("cannot open for writing: " + path.string());
  out << index_to_json(index).dump() << '\n';
  if (!out) throw IoError("write failed: " + path.string());
}

/// Loads and fully validates an index file: format version, histogram
/// normalization and uniformity, finite stats, unit embeddings with a
/// single dimensionality, unique ids, resolvable global reference.
inline ReferenceIndex load_index(const std::filesystem::path& path) {
  std::ifstream in(path, std::ios::binary);
  if (!in) throw IoError("cannot open " + path.string());
  nlohmann::json j;
  try {
    in >> j;
  } catch (const nlohmann::json::exception& e) {
    throw IoError("malformed index file " + path.string() + ": " + e.what());
  }

  auto fail = [&](const std::string& what) -> void {
    throw IoError("invalid index file " + path.string() + ": " + what);
  };

  ReferenceIndex index;
  try {
    if (!j.is_object()) fail("top level is not an object");
    if (!j.contains("format_version") || !j["format_version"].is_number_integer())
      fail("missing format_version");
    index.format_version = j["format_version"].get<int>();
    if (index.format_version != ReferenceIndex::kFormatVersion)
      fail("unknown format_version " + std::to_string(index.format_version));

    index.bins_per_channel = j.at("bins_per_channel").get<int>();
    try {
      check_bins(index.bins_per_channel);
    } catch (const ConfigError& e) {
      fail(e.what());
    }
    const std::size_t expected = static_cast<std::size_t>(3) * index.bins_per_channel;

    std::optional<std::size_t> embedding_dim;
    for (const auto& je : j.at("entries")) {
      IndexEntry e;
      e.id = je.at("id").get<std::string>();
      if (e.id.empty()) fail("entry with empty id");
      const std::string where = "entry '" + e.id + "'";
      e.gris_eligible = je.at("gris_eligible").get<bool>();

      e.histogram.bins_per_channel = index.bins_per_channel;
      e.histogram.values = je.at("histogram").get<std::vector<double>>();
      if (e.histogram.values.size() != expected)
        fail(where + ": histogram length != 3*bins_per_channel");
      double sum = 0.0;
      for (double v : e.histogram.values) {
        if (!(v >= 0.0) || !std::isfinite(v)) fail(where + ": negative histogram value");
        sum += v;
      }
      if (std::abs(sum - 1.0) > 1e-9) fail(where + ": histogram does not sum to 1");

      auto mean = je.at("lab_mean").get<std::vector<double>>();
      auto stdv = je.at("lab_std").get<std::vector<double>>();
      if (mean.size() != 3 || stdv.size() != 3) fail(where + ": lab stats must have 3 channels");
      for (int c = 0; c < 3; ++c) {
        if (!std::isfinite(mean[c]) || !std::isfinite(stdv[c]) || stdv[c] < 0.0)
          fail(where + ": lab stats must be finite with std >= 0");
        e.lab_stats.mean[c] = mean[c];
        e.lab_stats.std[c] = stdv[c];
      }

      if (!je.at("embedding").is_null()) {
        EmbeddingVector emb;
        emb.values = je.at("embedding").get<std::vector<double>>();
        double sq = 0.0;
        for (double v : emb.values) {
          if (!std::isfinite(v)) fail(where + ": non-finite embedding value");
          sq += v * v;
        }
        if (std::abs(std::sqrt(sq) - 1.0) > 1e-6) fail(where + ": embedding is not unit length");
        if (embedding_dim && emb.values.size() != *embedding_dim)
          fail(where + ": embedding dimension differs from other entries");
        embedding_dim = emb.values.size();
        e.embedding = std::move(emb);
      }
      index.entries.push_back(std::move(e));
    }

    if (!j.at("global_reference_id").is_null())
      index.global_reference_id = j.at("global_reference_id").get<std::string>();
  } catch (const nlohmann::json::exception& e) {
    fail(e.what());
  }

  std::vector<std::string> ids;
  ids.reserve(index.entries.size());
  for (const auto& e : index.entries) ids.push_back(e.id);
  std::sort(ids.begin(), ids.end());
  auto dup = std::adjacent_find(ids.begin(), ids.end());
  if (dup != ids.end()) fail("duplicate entry id '" + *dup + "'");

  if (index.global_reference_id && !index.find(*index.global_reference_id))
    fail("global_reference_id '" + *index.global_reference_id + "' names no entry");
  return index;
}

// ---------------------------------------------------------------------------
// Embedding files (one JSON object per line: {"id": ..., "vector": [...]})
// ---------------------------------------------------------------------------

inline std::map<std::string, EmbeddingVector> load_embeddings(
    const std::filesystem::path& path) {
  std::ifstream in(path, std::ios::binary);
  if (!in) throw IoError("cannot open " + path.string());

  std::map<std::string, EmbeddingVector> result;
  std::optional<std::size_t> dim;
  std::string line;
  std::size_t line_no = 0;
  while (std::getline(in, line)) {
    ++line_no;
    if (line.empty() || line.find_first_not_of(" \t\r") == std::string::npos) continue;
    nlohmann::json j;
    try {
      j = nlohmann::json::parse(line);
      std::string id = j.at("id").get<std::string>();
      std::vector<double> raw = j.at("vector").get<std::vector<double>>();
      if (id.empty())
        throw IoError(path.string() + " line " + std::to_string(line_no) + ": empty id");
      if (result.count(id))
        throw DataError("duplicate embedding id '" + id + "' in " + path.string());
      EmbeddingVector e = normalize_embedding(raw, "embedding '" + id + "'");
      if (dim && e.values.size() != *dim)
        throw DataError("embedding '" + id + "' has dimension " +
                        std::to_string(e.values.size()) + ", expected " +
                        std::to_string(*dim));
      dim = e.values.size();
      result.emplace(std::move(id), std::move(e));
    } catch (const nlohmann::json::exception& e) {
      throw IoError(path.string() + " line " + std::to_string(line_no) + ": " + e.what());
    }
  }
  return result;
}

// ---------------------------------------------------------------------------
// Index construction
// ---------------------------------------------------------------------------

struct BuildResult {
  ReferenceIndex index;
  std::size_t embeddings_matched = 0;
  std::vector<std::string> embeddings_unmatched;  // file ids absent from corpus
};

namespace detail {

inline void attach_embeddings(BuildResult& result,
                              const std::map<std::string, EmbeddingVector>& embeddings) {
  std::optional<std::size_t> dim;
  for (auto& e : result.index.entries) {
    auto it = embeddings.find(e.id);
    if (it == embeddings.end()) continue;
    if (dim && it->second.values.size() != *dim)
      throw DataError("embedding '" + e.id + "' has inconsistent dimension");
    dim = it->second.values.size();
    e.embedding = it->second;
    ++result.embeddings_matched;
  }
  for (const auto& [id, emb] : embeddings)
    if (!result.index.find(id)) result.embeddings_unmatched.push_back(id);
}

}  // namespace detail

/// Builds an index from decoded images (pure; no disk access).
inline BuildResult build_index_from_images(
    const std::vector<std::pair<std::string, RgbImage>>& images, int bins_per_channel,
    const std::map<std::string, EmbeddingVector>& embeddings = {}, int jobs = 1) {
  check_bins(bins_per_channel);
  if (images.empty()) throw UsageError("build_index: no images given");

  {
    std::vector<std::string> ids;
    ids.reserve(images.size());
    for (const auto& [id, img] : images) ids.push_back(id);
    std::sort(ids.begin(), ids.end());
    auto dup = std::adjacent_find(ids.begin(), ids.end());
    if (dup != ids.end()) throw UsageError("build_index: duplicate id '" + *dup + "'");
  }

  BuildResult result;
  result.index.bins_per_channel = bins_per_channel;
  result.index.entries.resize(images.size());
  parallel_for(images.size(), jobs, [&](std::size_t i) {
    const auto& [id, img] = images[i];
    IndexEntry& e = result.index.entries[i];
    e.id = id;
    e.histogram = compute_histogram(img, bins_per_channel);
    e.lab_stats = channel_stats(rgb_to_lab(img));
  });

  detail::attach_embeddings(result, embeddings);
  select_global_reference(result.index, jobs);
  return result;
}

/// Builds an index from an image directory, attaching embeddings by id when
/// an embedding file is given. Unmatched embedding ids are reported in the
/// result, not fatal. Images are decoded one at a time (the corpus never
/// has to fit in memory).
inline BuildResult build_index(const std::filesystem::path& corpus_dir, int bins_per_channel,
                               const std::optional<std::filesystem::path>& embeddings_file =
                                   std::nullopt,
                               int jobs = 0,
                               std::optional<std::pair<int, int>> resize = std::nullopt) {
  check_bins(bins_per_channel);
  std::vector<std::string> ids = list_corpus_ids(corpus_dir);
  if (ids.empty())
    throw IoError("corpus contains no decodable images: " + corpus_dir.string());

  std::map<std::string, EmbeddingVector> embeddings;
  if (embeddings_file) embeddings = load_embeddings(*embeddings_file);

  BuildResult result;
  result.index.bins_per_channel = bins_per_channel;
  result.index.entries.resize(ids.size());
  std::vector<std::string> item_errors(ids.size());
  parallel_for(ids.size(), jobs, [&](std::size_t i) {
    try {
      RgbImage img = read_image(corpus_dir / ids[i]);
      if (resize) img = resize_bilinear(img, resize->first, resize->second);
      IndexEntry& e = result.index.entries[i];
      e.id = ids[i];
      e.histogram = compute_histogram(img, bins_per_channel);
      e.lab_stats = channel_stats(rgb_to_lab(img));
    } catch (const Error& e) {
      item_errors[i] = e.what();
    }
  });
  // Report the first failure in id order, independent of thread scheduling.
  for (std::size_t i = 0; i < ids.size(); ++i)
    if (!item_errors[i].empty()) throw IoError(item_errors[i]);

  detail::attach_embeddings(result, embeddings);
  select_global_reference(result.index, jobs);
  return result;
}

}  // namespace dcin

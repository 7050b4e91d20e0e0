#include <doctest.h>

#include <algorithm>
#include <cmath>
#include <filesystem>
#include <fstream>
#include <limits>
#include <random>
#include <string>
#include <vector>

#include "dcin/image_io.hpp"
#include "dcin/reference_index.hpp"
#include "support.hpp"

using namespace dcin;
namespace fs = std::filesystem;

namespace {

struct TempDir {
  fs::path path;
  TempDir() {
    path = fs::temp_directory_path() /
           ("dcin-idx-" + std::to_string(Rng(std::random_device{}()).next_u64()));
    fs::create_directories(path);
  }
  ~TempDir() {
    std::error_code ec;
    fs::remove_all(path, ec);
  }
};

HistogramVector unit_axis_histogram(int bins, std::size_t axis) {
  HistogramVector h;
  h.bins_per_channel = bins;
  h.values.assign(static_cast<std::size_t>(3) * bins, 0.0);
  h.values[axis] = 1.0;
  return h;
}

HistogramVector random_histogram(Rng& rng, int bins) {
  HistogramVector h;
  h.bins_per_channel = bins;
  h.values.assign(static_cast<std::size_t>(3) * bins, 0.0);
  double sum = 0.0;
  for (auto& v : h.values) {
    v = rng.uniform(0.0, 1.0);
    sum += v;
  }
  for (auto& v : h.values) v /= sum;
  return h;
}

EmbeddingVector random_unit_vector(Rng& rng, std::size_t dim) {
  std::vector<double> raw(dim);
  for (auto& v : raw) v = rng.uniform(-1.0, 1.0);
  return normalize_embedding(raw, "test vector");
}

// Independent O(N^2) medoid: plain loops, own distance, id-sorted order.
std::string brute_force_medoid(const ReferenceIndex& index) {
  std::vector<const IndexEntry*> entries;
  for (const auto& e : index.entries)
    if (e.gris_eligible) entries.push_back(&e);
  std::sort(entries.begin(), entries.end(),
            [](const IndexEntry* a, const IndexEntry* b) { return a->id < b->id; });
  double best = std::numeric_limits<double>::infinity();
  std::string best_id;
  for (const IndexEntry* a : entries) {
    double total = 0.0;
    for (const IndexEntry* b : entries) {
      double sq = 0.0;
      for (std::size_t k = 0; k < a->histogram.values.size(); ++k) {
        double d = a->histogram.values[k] - b->histogram.values[k];
        sq += d * d;
      }
      total += std::sqrt(sq);
    }
    double avg = total / static_cast<double>(entries.size());
    if (avg < best) {
      best = avg;
      best_id = a->id;
    }
  }
  return best_id;
}

// Independent argmax of cosine similarity (id-sorted, strict improvement).
std::string brute_force_nearest(const EmbeddingVector& query, const ReferenceIndex& index) {
  std::vector<const IndexEntry*> entries;
  for (const auto& e : index.entries)
    if (e.embedding) entries.push_back(&e);
  std::sort(entries.begin(), entries.end(),
            [](const IndexEntry* a, const IndexEntry* b) { return a->id < b->id; });
  double best = -std::numeric_limits<double>::infinity();
  std::string best_id;
  for (const IndexEntry* e : entries) {
    double dot = 0.0;
    for (std::size_t k = 0; k < query.values.size(); ++k)
      dot += query.values[k] * e->embedding->values[k];
    if (dot > best) {
      best = dot;
      best_id = e->id;
    }
  }
  return best_id;
}

ReferenceIndex index_from_histograms(const std::vector<std::pair<std::string, HistogramVector>>& hs) {
  ReferenceIndex index;
  index.bins_per_channel = hs.empty() ? 8 : hs[0].second.bins_per_channel;
  for (const auto& [id, h] : hs) {
    IndexEntry e;
    e.id = id;
    e.histogram = h;
    index.entries.push_back(std::move(e));
  }
  return index;
}

}  // namespace

TEST_CASE("histogram of an all-black image puts 1/3 in bin 0 of each channel") {
  RgbImage black(2, 2, 0);
  HistogramVector h = compute_histogram(black, 8);
  REQUIRE(h.values.size() == 24);
  CHECK(h.values[0] == doctest::Approx(1.0 / 3).epsilon(1e-12));
  CHECK(h.values[8] == doctest::Approx(1.0 / 3).epsilon(1e-12));
  CHECK(h.values[16] == doctest::Approx(1.0 / 3).epsilon(1e-12));
  int zeros = 0;
  for (double v : h.values)
    if (v == 0.0) ++zeros;
  CHECK(zeros == 21);
}

TEST_CASE("histogram bins follow floor(v*b/256) with joint normalization") {
  // 8 pixels, R in {0,32,...,224}, G=B=0: every R bin 1/24, G/B bin0 = 1/3.
  RgbImage img(8, 1);
  for (int x = 0; x < 8; ++x) img.at(x, 0, 0) = static_cast<std::uint8_t>(32 * x);
  HistogramVector h = compute_histogram(img, 8);
  for (int k = 0; k < 8; ++k) CHECK(h.values[k] == doctest::Approx(1.0 / 24).epsilon(1e-12));
  CHECK(h.values[8] == doctest::Approx(1.0 / 3).epsilon(1e-12));
  CHECK(h.values[16] == doctest::Approx(1.0 / 3).epsilon(1e-12));

  double sum = 0.0;
  for (double v : h.values) sum += v;
  CHECK(std::abs(sum - 1.0) <= 1e-9);
}

TEST_CASE("histogram rejects bin counts that do not divide 256") {
  RgbImage img(2, 2, 0);
  CHECK_THROWS_AS(compute_histogram(img, 7), ConfigError);
  CHECK_THROWS_AS(compute_histogram(img, 1), ConfigError);
  CHECK_THROWS_AS(compute_histogram(img, 512), ConfigError);
  CHECK_NOTHROW(compute_histogram(img, 2));
  CHECK_NOTHROW(compute_histogram(img, 256));
}

TEST_CASE("histogram distance is euclidean, symmetric, zero iff equal") {
  Rng rng(21);
  HistogramVector a = unit_axis_histogram(8, 0);
  HistogramVector b = unit_axis_histogram(8, 1);
  CHECK(histogram_distance(a, a) == 0.0);
  CHECK(histogram_distance(a, b) == doctest::Approx(std::sqrt(2.0)).epsilon(1e-15));

  for (int trial = 0; trial < 50; ++trial) {
    HistogramVector x = random_histogram(rng, 8);
    HistogramVector y = random_histogram(rng, 8);
    double expect = 0.0;
    for (std::size_t k = 0; k < x.values.size(); ++k)
      expect += (x.values[k] - y.values[k]) * (x.values[k] - y.values[k]);
    expect = std::sqrt(expect);
    CHECK(std::abs(histogram_distance(x, y) - expect) < 1e-12);
    CHECK(histogram_distance(x, y) == histogram_distance(y, x));
  }

  HistogramVector small = unit_axis_histogram(4, 0);
  CHECK_THROWS_AS(histogram_distance(a, small), UsageError);
}

TEST_CASE("histogram of any image compares equal to itself at distance 0") {
  Rng rng(22);
  RgbImage img = test::random_image(rng, 10, 10);
  CHECK(histogram_distance(compute_histogram(img, 8), compute_histogram(img, 8)) == 0.0);
}

TEST_CASE("single-entry index selects that entry as global reference") {
  ReferenceIndex index = index_from_histograms({{"only.png", unit_axis_histogram(8, 2)}});
  CHECK(select_global_reference(index) == "only.png");
  CHECK(index.global_reference_id == "only.png");
}

TEST_CASE("hand-computed three-entry medoid with a tie") {
  // A and B share a histogram; C is orthogonal at distance sqrt(2).
  // D(A) = D(B) = sqrt(2)/3 < D(C) = 2*sqrt(2)/3; tie breaks to "A".
  ReferenceIndex index = index_from_histograms({{"C", unit_axis_histogram(8, 5)},
                                                {"B", unit_axis_histogram(8, 0)},
                                                {"A", unit_axis_histogram(8, 0)}});
  CHECK(select_global_reference(index) == "A");

  std::vector<double> avg(3, 0.0);
  const char* ids[3] = {"A", "B", "C"};
  for (int i = 0; i < 3; ++i) {
    const IndexEntry* a = index.find(ids[i]);
    for (int j = 0; j < 3; ++j)
      avg[i] += histogram_distance(a->histogram, index.find(ids[j])->histogram) / 3.0;
  }
  CHECK(avg[0] == doctest::Approx(0.47140452079103173).epsilon(1e-12));
  CHECK(avg[1] == doctest::Approx(0.47140452079103173).epsilon(1e-12));
  CHECK(avg[2] == doctest::Approx(0.9428090415820634).epsilon(1e-12));
}

TEST_CASE("global selection matches the brute-force oracle on random indices") {
  Rng rng(23);
  std::mt19937_64 shuffler(99);
  for (int trial = 0; trial < 25; ++trial) {
    int n = static_cast<int>(rng.uniform_int(1, 50));
    std::vector<std::pair<std::string, HistogramVector>> hs;
    for (int i = 0; i < n; ++i)
      hs.emplace_back("img_" + std::to_string(i) + ".png", random_histogram(rng, 8));
    // Seed occasional exact ties.
    if (n >= 3 && trial % 3 == 0) hs[0].second = hs[n - 1].second;

    ReferenceIndex index = index_from_histograms(hs);
    std::string got = select_global_reference(index);
    CHECK(got == brute_force_medoid(index));

    std::shuffle(index.entries.begin(), index.entries.end(), shuffler);
    CHECK(select_global_reference(index) == got);
  }
}

TEST_CASE("parallel row sums select the same medoid") {
  Rng rng(29);
  std::vector<std::pair<std::string, HistogramVector>> hs;
  for (int i = 0; i < 40; ++i)
    hs.emplace_back("e" + std::to_string(i), random_histogram(rng, 8));
  ReferenceIndex index = index_from_histograms(hs);
  std::string serial = select_global_reference(index, 1);
  CHECK(select_global_reference(index, 4) == serial);
}

TEST_CASE("gris eligibility restricts both candidates and the averaging set") {
  ReferenceIndex index = index_from_histograms({{"a", unit_axis_histogram(8, 0)},
                                                {"b", unit_axis_histogram(8, 1)},
                                                {"c", unit_axis_histogram(8, 1)}});
  // "b" and "c" coincide, so with everyone eligible the medoid is "b".
  CHECK(select_global_reference(index) == "b");
  // Excluding them leaves "a" as the only candidate.
  index.entries[1].gris_eligible = false;
  index.entries[2].gris_eligible = false;
  CHECK(select_global_reference(index) == "a");
  CHECK(brute_force_medoid(index) == "a");

  index.entries[0].gris_eligible = false;
  CHECK_THROWS_AS(select_global_reference(index), UsageError);
}

TEST_CASE("empty index cannot select a global reference") {
  ReferenceIndex index;
  CHECK_THROWS_AS(select_global_reference(index), UsageError);
}

TEST_CASE("local selection picks the highest cosine similarity") {
  ReferenceIndex index;
  index.bins_per_channel = 8;
  IndexEntry e1, e2;
  e1.id = "one";
  e1.embedding = EmbeddingVector{{1.0, 0.0}};
  e2.id = "two";
  e2.embedding = EmbeddingVector{{0.0, 1.0}};
  index.entries = {e1, e2};

  EmbeddingVector test = normalize_embedding({0.8, 0.6}, "query");
  CHECK(select_local_reference(test, index) == "one");
  CHECK(select_local_reference(*index.entries[1].embedding, index) == "two");
}

TEST_CASE("local selection ties break to the lexicographically smallest id") {
  ReferenceIndex index;
  IndexEntry a, b, c;
  a.id = "zz";
  a.embedding = EmbeddingVector{{1.0, 0.0}};
  b.id = "aa";
  b.embedding = EmbeddingVector{{1.0, 0.0}};
  c.id = "mm";
  c.embedding = EmbeddingVector{{0.0, 1.0}};
  index.entries = {a, b, c};
  EmbeddingVector query{{1.0, 0.0}};
  CHECK(select_local_reference(query, index) == "aa");
}

TEST_CASE("local selection matches the brute-force argmax on random instances") {
  Rng rng(24);
  std::mt19937_64 shuffler(7);
  for (int trial = 0; trial < 20; ++trial) {
    std::size_t dim = static_cast<std::size_t>(rng.uniform_int(2, 16));
    int n = static_cast<int>(rng.uniform_int(1, 100));
    ReferenceIndex index;
    for (int i = 0; i < n; ++i) {
      IndexEntry e;
      e.id = "v" + std::to_string(i);
      e.embedding = random_unit_vector(rng, dim);
      index.entries.push_back(std::move(e));
    }
    EmbeddingVector query = random_unit_vector(rng, dim);
    std::string got = select_local_reference(query, index);
    CHECK(got == brute_force_nearest(query, index));

    std::shuffle(index.entries.begin(), index.entries.end(), shuffler);
    CHECK(select_local_reference(query, index) == got);
  }
}

TEST_CASE("local selection requires embeddings and matching dimensions") {
  ReferenceIndex index;
  IndexEntry bare;
  bare.id = "no-embedding";
  index.entries.push_back(bare);
  EmbeddingVector query{{1.0, 0.0}};
  CHECK_THROWS_AS(select_local_reference(query, index), UsageError);

  IndexEntry with;
  with.id = "with";
  with.embedding = EmbeddingVector{{1.0, 0.0, 0.0}};
  index.entries.push_back(with);
  CHECK_THROWS_AS(select_local_reference(query, index), UsageError);
}

TEST_CASE("embedding normalization rejects zero and non-finite vectors") {
  CHECK_THROWS_AS(normalize_embedding({0.0, 0.0}, "z"), DataError);
  CHECK_THROWS_AS(normalize_embedding({1.0, std::nan("")}, "n"), DataError);
  EmbeddingVector e = normalize_embedding({3.0, 4.0}, "ok");
  CHECK(e.values[0] == doctest::Approx(0.6));
  CHECK(e.values[1] == doctest::Approx(0.8));
}

TEST_CASE("embedding files parse one JSON object per line") {
  TempDir tmp;
  fs::path p = tmp.path / "emb.jsonl";
  {
    std::ofstream out(p);
    out << R"({"id": "a.png", "vector": [3.0, 4.0]})" << "\n";
    out << "\n";  // blank lines are fine
    out << R"({"id": "b.png", "vector": [1.0, 0.0]})" << "\n";
  }
  auto embeddings = load_embeddings(p);
  REQUIRE(embeddings.size() == 2);
  CHECK(embeddings.at("a.png").values[0] == doctest::Approx(0.6));
  CHECK(embeddings.at("b.png").values[0] == doctest::Approx(1.0));

  SUBCASE("malformed line is an io error naming the line") {
    std::ofstream out(p, std::ios::app);
    out << "{not json}\n";
    out.close();
    CHECK_THROWS_WITH_AS(load_embeddings(p), doctest::Contains("line 4"), IoError);
  }
  SUBCASE("duplicate ids rejected") {
    std::ofstream out(p, std::ios::app);
    out << R"({"id": "a.png", "vector": [1.0, 0.0]})" << "\n";
    out.close();
    CHECK_THROWS_AS(load_embeddings(p), DataError);
  }
  SUBCASE("dimension drift rejected") {
    std::ofstream out(p, std::ios::app);
    out << R"({"id": "c.png", "vector": [1.0, 0.0, 0.0]})" << "\n";
    out.close();
    CHECK_THROWS_AS(load_embeddings(p), DataError);
  }
  SUBCASE("zero vector rejected") {
    std::ofstream out(p, std::ios::app);
    out << R"({"id": "c.png", "vector": [0.0, 0.0]})" << "\n";
    out.close();
    CHECK_THROWS_WITH_AS(load_embeddings(p), doctest::Contains("c.png"), DataError);
  }
}

TEST_CASE("building from a synthetic corpus picks the medoid of the color family") {
  TempDir tmp;
  Rng rng(25);
  // Two red-ish images and one blue image.
  auto make = [&](std::uint8_t r, std::uint8_t g, std::uint8_t b, int jitter) {
    RgbImage img(8, 8);
    for (std::size_t i = 0; i < img.pixel_count(); ++i) {
      img.data[i * 3 + 0] = static_cast<std::uint8_t>(std::clamp<int>(r + int(rng.uniform_int(-jitter, jitter)), 0, 255));
      img.data[i * 3 + 1] = static_cast<std::uint8_t>(std::clamp<int>(g + int(rng.uniform_int(-jitter, jitter)), 0, 255));
      img.data[i * 3 + 2] = static_cast<std::uint8_t>(std::clamp<int>(b + int(rng.uniform_int(-jitter, jitter)), 0, 255));
    }
    return img;
  };
  write_png_rgb(tmp.path / "red1.png", make(200, 40, 40, 5));
  write_png_rgb(tmp.path / "red2.png", make(195, 45, 45, 5));
  write_png_rgb(tmp.path / "blue.png", make(40, 40, 200, 5));

  BuildResult result = build_index(tmp.path, 8);
  REQUIRE(result.index.entries.size() == 3);
  REQUIRE(result.index.global_reference_id.has_value());
  std::string global = *result.index.global_reference_id;
  CHECK((global == "red1.png" || global == "red2.png"));
  CHECK(global == brute_force_medoid(result.index));
  CHECK(result.embeddings_matched == 0);

  // Every stored histogram is normalized.
  for (const auto& e : result.index.entries) {
    double sum = 0.0;
    for (double v : e.histogram.values) sum += v;
    CHECK(std::abs(sum - 1.0) <= 1e-9);
  }
}

TEST_CASE("index build attaches embeddings by id and reports unmatched ids") {
  TempDir tmp;
  RgbImage img(4, 4, 120);
  write_png_rgb(tmp.path / "x.png", img);
  write_png_rgb(tmp.path / "y.png", img);
  fs::path emb = tmp.path / "emb.jsonl";
  {
    std::ofstream out(emb);
    out << R"({"id": "x.png", "vector": [1.0, 2.0]})" << "\n";
    out << R"({"id": "ghost.png", "vector": [2.0, 1.0]})" << "\n";
  }
  BuildResult result = build_index(tmp.path, 8, emb);
  CHECK(result.embeddings_matched == 1);
  REQUIRE(result.embeddings_unmatched.size() == 1);
  CHECK(result.embeddings_unmatched[0] == "ghost.png");
  CHECK(result.index.find("x.png")->embedding.has_value());
  CHECK(!result.index.find("y.png")->embedding.has_value());
}

TEST_CASE("an index without embeddings still works, but LRIS queries fail") {
  TempDir tmp;
  RgbImage img(4, 4, 120);
  write_png_rgb(tmp.path / "x.png", img);
  fs::path emb = tmp.path / "empty.jsonl";
  std::ofstream(emb).close();

  BuildResult result = build_index(tmp.path, 8, emb);
  CHECK(result.embeddings_matched == 0);
  EmbeddingVector query{{1.0}};
  CHECK_THROWS_WITH_AS(select_local_reference(query, result.index),
                       doctest::Contains("no embeddings"), UsageError);
}

TEST_CASE("empty corpus is an io error") {
  TempDir tmp;
  CHECK_THROWS_AS(build_index(tmp.path, 8), IoError);
}

TEST_CASE("duplicate ids are rejected when building from memory") {
  std::vector<std::pair<std::string, RgbImage>> images;
  images.emplace_back("same", RgbImage(2, 2, 10));
  images.emplace_back("same", RgbImage(2, 2, 20));
  CHECK_THROWS_AS(build_index_from_images(images, 8), UsageError);
}

TEST_CASE("save then load is the identity on all index contents") {
  TempDir tmp;
  Rng rng(26);
  std::vector<std::pair<std::string, RgbImage>> images;
  for (int i = 0; i < 5; ++i)
    images.emplace_back("img" + std::to_string(i) + ".png",
                        test::random_image(rng, 6, 6));
  std::map<std::string, EmbeddingVector> embeddings;
  embeddings["img1.png"] = random_unit_vector(rng, 4);
  embeddings["img3.png"] = random_unit_vector(rng, 4);

  BuildResult built = build_index_from_images(images, 8, embeddings);
  fs::path p = tmp.path / "index.json";
  save_index(built.index, p);
  ReferenceIndex loaded = load_index(p);

  CHECK(loaded.format_version == built.index.format_version);
  CHECK(loaded.bins_per_channel == built.index.bins_per_channel);
  CHECK(loaded.global_reference_id == built.index.global_reference_id);
  REQUIRE(loaded.entries.size() == built.index.entries.size());
  for (std::size_t i = 0; i < loaded.entries.size(); ++i) {
    const auto& a = loaded.entries[i];
    const auto& b = built.index.entries[i];
    CHECK(a.id == b.id);
    CHECK(a.gris_eligible == b.gris_eligible);
    CHECK(a.histogram == b.histogram);
    CHECK(a.lab_stats.mean == b.lab_stats.mean);
    CHECK(a.lab_stats.std == b.lab_stats.std);
    CHECK(a.embedding == b.embedding);
  }
}

TEST_CASE("index loading validates structure and invariants") {
  TempDir tmp;
  fs::path p = tmp.path / "index.json";

  auto write_file = [&](const std::string& text) {
    std::ofstream out(p, std::ios::trunc);
    out << text;
  };
  std::string valid = R"({"format_version":1,"bins_per_channel":2,"global_reference_id":"a",
    "entries":[{"id":"a","gris_eligible":true,
      "histogram":[0.5,0.5,0,0,0,0],
      "lab_mean":[0,0,0],"lab_std":[1,1,1],"embedding":null}]})";

  SUBCASE("valid file loads") {
    write_file(valid);
    ReferenceIndex idx = load_index(p);
    CHECK(idx.entries.size() == 1);
    CHECK(idx.global_reference_id == "a");
  }
  SUBCASE("unknown format version") {
    write_file(R"({"format_version":9,"bins_per_channel":2,"global_reference_id":null,"entries":[]})");
    CHECK_THROWS_WITH_AS(load_index(p), doctest::Contains("format_version"), IoError);
  }
  SUBCASE("histogram summing to 2 is rejected") {
    std::string bad = valid;
    auto pos = bad.find("[0.5,0.5,0,0,0,0]");
    bad.replace(pos, std::string("[0.5,0.5,0,0,0,0]").size(), "[1.0,1.0,0,0,0,0]");
    write_file(bad);
    CHECK_THROWS_WITH_AS(load_index(p), doctest::Contains("sum"), IoError);
  }
  SUBCASE("truncated file is rejected") {
    write_file(valid.substr(0, valid.size() / 2));
    CHECK_THROWS_AS(load_index(p), IoError);
  }
  SUBCASE("dangling global reference is rejected") {
    std::string bad = valid;
    auto pos = bad.find("\"global_reference_id\":\"a\"");
    bad.replace(pos, std::string("\"global_reference_id\":\"a\"").size(),
                "\"global_reference_id\":\"ghost\"");
    write_file(bad);
    CHECK_THROWS_WITH_AS(load_index(p), doctest::Contains("ghost"), IoError);
  }
  SUBCASE("duplicate entry ids are rejected") {
    std::string bad = R"({"format_version":1,"bins_per_channel":2,"global_reference_id":null,
      "entries":[
        {"id":"a","gris_eligible":true,"histogram":[0.5,0.5,0,0,0,0],"lab_mean":[0,0,0],"lab_std":[1,1,1],"embedding":null},
        {"id":"a","gris_eligible":true,"histogram":[0.5,0.5,0,0,0,0],"lab_mean":[0,0,0],"lab_std":[1,1,1],"embedding":null}]})";
    write_file(bad);
    CHECK_THROWS_WITH_AS(load_index(p), doctest::Contains("duplicate"), IoError);
  }
  SUBCASE("non-unit embedding is rejected") {
    std::string bad = valid;
    auto pos = bad.find("\"embedding\":null");
    bad.replace(pos, std::string("\"embedding\":null").size(),
                "\"embedding\":[0.5,0.5]");
    write_file(bad);
    CHECK_THROWS_WITH_AS(load_index(p), doctest::Contains("unit"), IoError);
  }
  SUBCASE("negative histogram value is rejected") {
    std::string bad = valid;
    auto pos = bad.find("[0.5,0.5,0,0,0,0]");
    bad.replace(pos, std::string("[0.5,0.5,0,0,0,0]").size(), "[1.5,-0.5,0,0,0,0]");
    write_file(bad);
    CHECK_THROWS_AS(load_index(p), IoError);
  }
}

TEST_CASE("saved index files are byte-identical across runs") {
  TempDir tmp;
  Rng rng(27);
  std::vector<std::pair<std::string, RgbImage>> images;
  for (int i = 0; i < 3; ++i)
    images.emplace_back("i" + std::to_string(i), test::random_image(rng, 5, 5));

  BuildResult a = build_index_from_images(images, 8);
  BuildResult b = build_index_from_images(images, 8);
  fs::path pa = tmp.path / "a.json", pb = tmp.path / "b.json";
  save_index(a.index, pa);
  save_index(b.index, pb);

  std::ifstream fa(pa, std::ios::binary), fb(pb, std::ios::binary);
  std::string sa((std::istreambuf_iterator<char>(fa)), {});
  std::string sb((std::istreambuf_iterator<char>(fb)), {});
  CHECK(sa == sb);
  CHECK(!sa.empty());
}

#include "feasc/datasets.hpp"

#include <openssl/evp.h>

#include <algorithm>
#include <array>
#include <exception>
#include <cmath>
#include <filesystem>
#include <fstream>
#include <iomanip>
#include <sstream>

#include "feasc/image.hpp"
#include "feasc/rng.hpp"
#include "json.hpp"

namespace fs = std::filesystem;
using json = nlohmann::ordered_json;

namespace feasc {

std::string sha1_hex(const std::string& bytes) {
  unsigned char digest[EVP_MAX_MD_SIZE];
  unsigned int len = 0;
  if (EVP_Digest(bytes.data(), bytes.size(), digest, &len, EVP_sha1(), nullptr) != 1)
    throw std::runtime_error("SHA-1 digest failed");
  std::ostringstream out;
  for (unsigned int i = 0; i < len; ++i) out << std::hex << std::setw(2) << std::setfill('0') << int(digest[i]);
  return out.str();
}

std::string sha1_file(const std::string& path) {
  std::ifstream in(path, std::ios::binary);
  if (!in) throw IngestionError(path, "cannot open file");
  std::ostringstream buf;
  buf << in.rdbuf();
  return sha1_hex(buf.str());
}

std::vector<ManifestEntry> DatasetManifest::split(const std::string& name) const {
  std::vector<ManifestEntry> out;
  for (const auto& e : entries)
    if (e.split == name) out.push_back(e);
  return out;
}

std::string DatasetManifest::absolute_path(const ManifestEntry& e) const { return (fs::path(root) / e.path).string(); }

void DatasetManifest::update_checksum() {
  std::string canon;
  for (const auto& c : classes) canon += "class\t" + c + "\n";
  for (const auto& e : entries)
    canon += e.path + "\t" + std::to_string(e.label) + "\t" + e.split + "\t" + e.sha1 + "\n";
  checksum = sha1_hex(canon);
}

std::string DatasetManifest::to_json() const {
  json j;
  j["root"] = root;
  j["classes"] = classes;
  j["files"] = json::array();
  for (const auto& e : entries)
    j["files"].push_back({{"path", e.path}, {"label", e.label}, {"split", e.split}, {"sha1", e.sha1}});
  j["warnings"] = warnings;
  j["errors"] = errors;
  j["checksum"] = checksum;
  return j.dump(2) + "\n";
}

DatasetManifest DatasetManifest::from_json(const std::string& text) {
  DatasetManifest m;
  try {
    const json j = json::parse(text);
    m.root = j.at("root").get<std::string>();
    m.classes = j.at("classes").get<std::vector<std::string>>();
    for (const auto& f : j.at("files"))
      m.entries.push_back({f.at("path").get<std::string>(), f.at("label").get<int>(), f.at("split").get<std::string>(),
                           f.at("sha1").get<std::string>()});
    m.warnings = j.value("warnings", std::vector<std::string>{});
    m.errors = j.value("errors", std::vector<std::string>{});
    m.checksum = j.at("checksum").get<std::string>();
  } catch (const json::exception& e) {
    throw ValidationError(std::string("malformed manifest: ") + e.what());
  }
  for (const auto& e : m.entries) {
    if (e.label < 0 || e.label >= static_cast<int>(m.classes.size()))
      throw ValidationError("manifest label out of range for " + e.path);
    if (e.split != "train" && e.split != "test") throw ValidationError("unknown split '" + e.split + "' for " + e.path);
  }
  return m;
}

void DatasetManifest::save(const std::string& path) const {
  std::ofstream out(path, std::ios::binary);
  if (!out) throw IngestionError(path, "cannot write manifest");
  out << to_json();
  if (!out) throw IngestionError(path, "cannot write manifest");
}

DatasetManifest DatasetManifest::load(const std::string& path) {
  std::ifstream in(path, std::ios::binary);
  if (!in) throw IngestionError(path, "cannot open manifest");
  std::ostringstream buf;
  buf << in.rdbuf();
  return from_json(buf.str());
}

DatasetManifest build_manifest(const std::string& root) {
  if (!fs::is_directory(root)) throw IngestionError(root, "not a directory");
  DatasetManifest m;
  m.root = fs::absolute(root).lexically_normal().string();

  std::vector<std::string> class_dirs;
  for (const auto& d : fs::directory_iterator(root))
    if (d.is_directory() && d.path().filename().string().front() != '.') class_dirs.push_back(d.path().filename().string());
  std::sort(class_dirs.begin(), class_dirs.end());

  for (const auto& name : class_dirs) {
    std::vector<std::string> files;
    for (const auto& f : fs::directory_iterator(fs::path(root) / name))
      if (f.is_regular_file() && f.path().filename().string().front() != '.') files.push_back(f.path().filename().string());
    std::sort(files.begin(), files.end());

    std::vector<ManifestEntry> good;
    for (const auto& file : files) {
      const std::string rel = (fs::path(name) / file).generic_string();
      const std::string abs = (fs::path(root) / rel).string();
      try {
        load_image(abs);
        good.push_back({rel, 0, "", sha1_file(abs)});
      } catch (const IngestionError& e) {
        m.errors.push_back(e.what());
      }
    }
    if (good.empty()) {
      m.warnings.push_back("class '" + name + "' has no readable images and was excluded");
      continue;
    }
    const int label = static_cast<int>(m.classes.size());
    m.classes.push_back(name);
    for (std::size_t i = 0; i < good.size(); ++i) {
      good[i].label = label;
      good[i].split = i % 5 == 4 ? "test" : "train";
      m.entries.push_back(good[i]);
    }
  }
  if (m.classes.empty()) throw IngestionError(root, "no classes found");
  m.update_checksum();
  return m;
}

void SubsetSpec::validate() const {
  if (!(fraction > 0.0 && fraction <= 1.0)) throw ValidationError("subset fraction must be in (0, 1], got " + std::to_string(fraction));
}

DatasetManifest stratified_subset(const DatasetManifest& m, const SubsetSpec& s) {
  s.validate();
  std::vector<std::vector<std::size_t>> per_class(m.classes.size());
  for (std::size_t i = 0; i < m.entries.size(); ++i)
    if (m.entries[i].split == "train") per_class.at(m.entries[i].label).push_back(i);

  std::vector<bool> keep(m.entries.size(), false);
  for (std::size_t c = 0; c < per_class.size(); ++c) {
    auto& idx = per_class[c];
    if (idx.empty()) continue;
    Rng rng(derive_seed(s.seed, c));
    for (std::size_t i = idx.size() - 1; i > 0; --i) std::swap(idx[i], idx[rng.index(i + 1)]);
    const long k = std::max(1L, std::lround(s.fraction * static_cast<double>(idx.size())));
    for (long i = 0; i < k; ++i) keep[idx[i]] = true;
  }
  DatasetManifest out = m;
  out.entries.clear();
  for (std::size_t i = 0; i < m.entries.size(); ++i)
    if (keep[i] || m.entries[i].split != "train") out.entries.push_back(m.entries[i]);
  out.update_checksum();
  return out;
}

void SyntheticSpec::validate() const {
  if (n_classes < 2) throw ValidationError("n_classes must be >= 2");
  if (n_per_class < 1) throw ValidationError("n_per_class must be >= 1");
  if (resolution < 8) throw ValidationError("resolution must be >= 8");
}

namespace {

constexpr double kDominantShare = 0.5;
constexpr double kDark = 0.1, kLight = 0.95;

// Texture intensity in [0, 1] at offset (dy, dx) from a blob centre.
double texture(int kind, double dy, double dx, double period, double phase) {
  constexpr double two_pi = 6.283185307179586;
  switch (kind) {
    case 0: return 0.5 + 0.5 * std::sin(two_pi * dy / period + phase);
    case 1: return 0.5 + 0.5 * std::sin(two_pi * dx / period + phase);
    case 2: return std::sin(two_pi * dy / period + phase) * std::sin(two_pi * dx / period + phase) > 0 ? 1.0 : 0.0;
    default: return 0.5 + 0.5 * std::cos(two_pi * std::hypot(dy, dx) / period + phase);
  }
}

}  // namespace

Tensor render_synthetic_image(int label, int n_classes, int resolution, std::uint64_t seed) {
  if (label < 0 || label >= n_classes) throw ValidationError("label out of range");
  Rng rng(seed);
  const int r = resolution;
  const std::size_t plane = static_cast<std::size_t>(r) * r;
  Tensor img({3, r, r});

  const double base = rng.uniform(0.4, 0.5);
  for (std::size_t i = 0; i < plane; ++i) {
    const double v = base + 0.04 * rng.normal();
    for (int c = 0; c < 3; ++c) img[c * plane + i] = v;
  }

  // Class c favours texture c % 4 at period scale c / 4; other blobs draw
  // texture and scale uniformly.
  const int scales = (n_classes + 3) / 4;
  const int n_blobs = std::max(4, static_cast<int>(std::lround(16.0 * plane / (64.0 * 64.0))));

  for (int b = 0; b < n_blobs; ++b) {
    const bool dominant = rng.bernoulli(kDominantShare);
    const int kind = dominant ? label % 4 : static_cast<int>(rng.index(4));
    const int scale = dominant ? label / 4 : static_cast<int>(rng.index(static_cast<std::uint64_t>(scales)));
    const double period = r * 0.18 * (1.0 + 0.5 * scale);
    const double cy = rng.uniform(0, r), cx = rng.uniform(0, r);
    const double radius = r * rng.uniform(0.09, 0.14);
    const double phase = rng.uniform(0, 6.283185307179586);
    const int y0 = std::max(0, static_cast<int>(cy - radius - 1)), y1 = std::min(r, static_cast<int>(cy + radius + 2));
    const int x0 = std::max(0, static_cast<int>(cx - radius - 1)), x1 = std::min(r, static_cast<int>(cx + radius + 2));
    for (int y = y0; y < y1; ++y)
      for (int x = x0; x < x1; ++x) {
        const double dy = y + 0.5 - cy, dx = x + 0.5 - cx;
        const double alpha = std::clamp(radius - std::hypot(dy, dx) + 0.5, 0.0, 1.0);
        if (alpha <= 0) continue;
        const double v = kDark + (kLight - kDark) * texture(kind, dy, dx, period, phase);
        for (int c = 0; c < 3; ++c) {
          Scalar& px = img[c * plane + static_cast<std::size_t>(y) * r + x];
          px = (1 - alpha) * px + alpha * v;
        }
      }
  }
  for (auto& v : img.values()) v = std::clamp(v, 0.0, 1.0);
  return img;
}

DatasetManifest generate_synthetic(const std::string& out_dir, const SyntheticSpec& spec) {
  spec.validate();
  std::error_code ec;
  fs::create_directories(out_dir, ec);
  if (ec) throw IngestionError(out_dir, ec.message());
  const int width = spec.n_classes > 100 ? 4 : 3;
  for (int c = 0; c < spec.n_classes; ++c) {
    std::ostringstream name;
    name << "class_" << std::setw(width) << std::setfill('0') << c;
    const fs::path dir = fs::path(out_dir) / name.str();
    fs::create_directories(dir, ec);
    if (ec) throw IngestionError(dir.string(), ec.message());
    // Rendering is independent per image; PNG encoding stays on one thread.
    std::vector<Tensor> images(spec.n_per_class);
#pragma omp parallel for schedule(static)
    for (int i = 0; i < spec.n_per_class; ++i)
      images[i] = render_synthetic_image(c, spec.n_classes, spec.resolution,
                                         derive_seed(spec.seed, static_cast<std::uint64_t>(c), static_cast<std::uint64_t>(i)));
    for (int i = 0; i < spec.n_per_class; ++i) {
      std::ostringstream file;
      file << std::setw(5) << std::setfill('0') << i << ".png";
      save_image((dir / file.str()).string(), images[i]);
    }
  }
  DatasetManifest m = build_manifest(out_dir);
  m.save((fs::path(out_dir) / "manifest.json").string());
  return m;
}

BlobImage render_single_blob(int resolution, std::uint64_t seed) {
  Rng rng(seed);
  const int r = resolution;
  BlobImage out;
  out.image = Tensor({3, r, r}, 0.5);
  const int radius = std::max(3, r / 5);
  const int cy = radius + static_cast<int>(rng.index(static_cast<std::uint64_t>(r - 2 * radius)));
  const int cx = radius + static_cast<int>(rng.index(static_cast<std::uint64_t>(r - 2 * radius)));
  out.top = cy - radius;
  out.left = cx - radius;
  out.bottom = cy + radius;
  out.right = cx + radius;
  const std::size_t plane = static_cast<std::size_t>(r) * r;
  for (int y = out.top; y < out.bottom; ++y)
    for (int x = out.left; x < out.right; ++x) {
      const double v = ((y - out.top) / 2 + (x - out.left) / 2) % 2 ? 1.0 : 0.0;
      for (int c = 0; c < 3; ++c) out.image[c * plane + static_cast<std::size_t>(y) * r + x] = v;
    }
  return out;
}

LabeledImages load_split(const DatasetManifest& m, const std::string& split) {
  LabeledImages out;
  out.n_classes = static_cast<int>(m.classes.size());
  const auto entries = m.split(split);
  out.images.resize(entries.size());
  out.labels.resize(entries.size());
  std::vector<std::exception_ptr> failures(entries.size());
#pragma omp parallel for schedule(static)
  for (std::size_t i = 0; i < entries.size(); ++i) {
    out.labels[i] = entries[i].label;
    try {
      out.images[i] = load_image(m.absolute_path(entries[i]));
    } catch (...) {
      failures[i] = std::current_exception();
    }
  }
  for (const auto& f : failures)
    if (f) std::rethrow_exception(f);
  return out;
}

}  // namespace feasc

#pragma once

#include <cstdint>
#include <string>
#include <vector>

#include "feasc/tensor.hpp"

namespace feasc {

struct ManifestEntry {
  std::string path;  // relative to the manifest root
  int label = 0;
  std::string split;  // "train" or "test"
  std::string sha1;   // of the file bytes
};

struct DatasetManifest {
  std::string root;
  std::vector<std::string> classes;
  std::vector<ManifestEntry> entries;
  std::vector<std::string> warnings;
  std::vector<std::string> errors;
  std::string checksum;

  std::vector<ManifestEntry> split(const std::string& name) const;
  std::string absolute_path(const ManifestEntry& e) const;
  /// Recomputes `checksum` from classes and entries (root excluded).
  void update_checksum();

  std::string to_json() const;
  static DatasetManifest from_json(const std::string& text);
  void save(const std::string& path) const;
  static DatasetManifest load(const std::string& path);
};

/// Scans a directory-per-class tree. Classes are sorted alphabetically, files
/// within a class by name; every fifth file of a class (index % 5 == 4) goes to
/// the test split. Empty classes are dropped with a warning; files that fail to
/// decode are listed under errors and skipped.
DatasetManifest build_manifest(const std::string& root);

struct SubsetSpec {
  double fraction = 1.0;
  std::uint64_t seed = 0;
  void validate() const;
};

/// Keeps max(1, round(fraction * n)) training files per class, where n is the
/// class's training count. Selections are prefixes of one seeded permutation
/// per class, so smaller fractions nest inside larger ones. Test entries are
/// kept unchanged.
DatasetManifest stratified_subset(const DatasetManifest& m, const SubsetSpec& s);

struct SyntheticSpec {
  int n_classes = 4;
  int n_per_class = 250;
  int resolution = 64;
  std::uint64_t seed = 0;
  void validate() const;
};

/// One "stacked ingredients" image: small grey textured blobs scattered over a
/// noisy grey background. Half the blobs (in expectation) carry the class's
/// texture; the rest are drawn from all textures.
Tensor render_synthetic_image(int label, int n_classes, int resolution, std::uint64_t seed);

/// Writes <out_dir>/<class>/<index>.png plus manifest.json and returns the manifest.
DatasetManifest generate_synthetic(const std::string& out_dir, const SyntheticSpec& spec);

struct BlobImage {
  Tensor image;
  int top = 0, left = 0, bottom = 0, right = 0;  // bounding box, bottom/right exclusive
};

/// Flat grey image with a single high-contrast checkered blob.
BlobImage render_single_blob(int resolution, std::uint64_t seed);

struct LabeledImages {
  std::vector<Tensor> images;
  std::vector<int> labels;
  int n_classes = 0;
  std::size_t size() const { return images.size(); }
};

/// Decodes every entry of one split into memory.
LabeledImages load_split(const DatasetManifest& m, const std::string& split);

std::string sha1_hex(const std::string& bytes);
std::string sha1_file(const std::string& path);

}  // namespace feasc

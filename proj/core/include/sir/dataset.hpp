#pragma once

#include <filesystem>
#include <optional>
#include <string>
#include <utility>
#include <vector>

#include "sir/image.hpp"
#include "sir/shape_model.hpp"

namespace sir {

struct ManifestEntry {
  std::string imagePath;       // relative to the manifest file
  std::string annotationPath;  // pts file, original image coordinates
  std::optional<FaceBox> faceBox;
};

// JSON manifest listing images, annotations and face boxes. When an entry
// has no box, one is synthesized from the landmark bounding box (expanded
// 20%) at load time.
struct DatasetManifest {
  int schemaVersion = 1;
  std::vector<ManifestEntry> entries;

  static DatasetManifest load(const std::filesystem::path& path);
  void save(const std::filesystem::path& path) const;
};

struct DatasetEntry {
  std::string id;              // image filename stem
  Image image;                 // face-normalized crop
  LandmarkSet landmarks;       // ground truth in the normalized frame
  ScaleTranslate toNormalized; // raw coordinates -> normalized frame
  // Filled by prepare_dataset:
  PoseShapeParams gtParams;     // model fit of `landmarks`
  PoseShapeParams meanCenter;   // box-canonical placement of the mean shape
  bool prepared = false;
};

struct Dataset {
  int faceSize = 256;
  std::vector<DatasetEntry> entries;

  std::size_t size() const { return entries.size(); }
  bool empty() const { return entries.empty(); }
  int landmark_count() const {
    return entries.empty() ? 0 : static_cast<int>(entries.front().landmarks.count());
  }
  // Side of the face box in the normalized frame; shared by every entry and
  // used to normalize regression targets.
  double face_box_side() const {
    return entries.empty() ? 0.0 : entries.front().image.faceBox.side();
  }
};

struct LoadOptions {
  int faceSize = 256;
  double boxMargin = 0.10;
};

// Loads every manifest entry, crops + resizes faces, and maps annotations
// into the normalized frame. Missing files, malformed pts and landmark-count
// mismatches throw DataError naming the offending path.
Dataset load_dataset(const std::filesystem::path& manifestPath, const LoadOptions& options = {});

// Fits per-image pose/shape parameters and the box-canonical mean placement.
// Must run before sampling or training.
void prepare_dataset(Dataset& dataset, const ShapeModel& model);

// Deterministic split: the first (1 - holdout) fraction in manifest order
// trains, the tail is held out.
std::pair<Dataset, Dataset> split_dataset(const Dataset& dataset, double holdoutFraction);

// Writes one pts file per entry (named <id>.pts) in original image
// coordinates, inverting the normalization transform.
void write_predictions(const std::vector<LandmarkSet>& predictionsNormalizedFrame,
                       const Dataset& dataset, const std::filesystem::path& outDir);

}  // namespace sir

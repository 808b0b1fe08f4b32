#include "sir/dataset.hpp"

#include <fstream>
#include <iostream>

#include <nlohmann/json.hpp>

#include "sir/errors.hpp"
#include "sir/io.hpp"
#include "sir/patches.hpp"

namespace sir {

DatasetManifest DatasetManifest::load(const std::filesystem::path& path) {
  std::ifstream is(path);
  if (!is) throw DataError("cannot open manifest '" + path.string() + "'");
  nlohmann::json doc;
  try {
    is >> doc;
  } catch (const nlohmann::json::exception& e) {
    throw DataError("manifest '" + path.string() + "' is not valid JSON: " + e.what());
  }

  DatasetManifest m;
  m.schemaVersion = doc.value("schemaVersion", 1);
  if (m.schemaVersion != 1) {
    throw DataError("manifest '" + path.string() + "' has unsupported schemaVersion " +
                    std::to_string(m.schemaVersion));
  }
  if (!doc.contains("entries") || !doc["entries"].is_array()) {
    throw DataError("manifest '" + path.string() + "' is missing the entries array");
  }
  for (const auto& e : doc["entries"]) {
    ManifestEntry entry;
    entry.imagePath = e.at("image").get<std::string>();
    entry.annotationPath = e.at("annotation").get<std::string>();
    if (e.contains("faceBox")) {
      const auto& b = e["faceBox"];
      entry.faceBox = FaceBox{b.at("x").get<double>(), b.at("y").get<double>(),
                              b.at("w").get<double>(), b.at("h").get<double>()};
    }
    m.entries.push_back(std::move(entry));
  }
  return m;
}

void DatasetManifest::save(const std::filesystem::path& path) const {
  nlohmann::json doc;
  doc["schemaVersion"] = schemaVersion;
  doc["entries"] = nlohmann::json::array();
  for (const ManifestEntry& e : entries) {
    nlohmann::json je;
    je["image"] = e.imagePath;
    je["annotation"] = e.annotationPath;
    if (e.faceBox) {
      je["faceBox"] = {{"x", e.faceBox->x}, {"y", e.faceBox->y},
                       {"w", e.faceBox->w}, {"h", e.faceBox->h}};
    }
    doc["entries"].push_back(std::move(je));
  }
  std::ofstream os(path, std::ios::trunc);
  if (!os) throw DataError("cannot open '" + path.string() + "' for writing");
  os << doc.dump(2) << "\n";
}

Dataset load_dataset(const std::filesystem::path& manifestPath, const LoadOptions& options) {
  DatasetManifest manifest = DatasetManifest::load(manifestPath);
  const std::filesystem::path root = manifestPath.parent_path();

  Dataset ds;
  ds.faceSize = options.faceSize;
  if (manifest.entries.empty()) {
    std::cerr << "warning: manifest '" << manifestPath.string() << "' lists no entries\n";
    return ds;
  }

  int landmarkCount = -1;
  for (const ManifestEntry& me : manifest.entries) {
    const std::filesystem::path imgPath = root / me.imagePath;
    const std::filesystem::path ptsPath = root / me.annotationPath;
    Image raw = read_pnm(imgPath);
    LandmarkSet lms = read_pts(ptsPath);
    if (landmarkCount < 0) {
      landmarkCount = static_cast<int>(lms.count());
    } else if (static_cast<int>(lms.count()) != landmarkCount) {
      throw DataError("'" + ptsPath.string() + "' has " + std::to_string(lms.count()) +
                      " landmarks, dataset uses " + std::to_string(landmarkCount));
    }
    raw.faceBox = me.faceBox ? *me.faceBox : landmark_bounding_box(lms);
    if (!raw.faceBox.valid()) {
      throw DataError("'" + imgPath.string() + "': face box has zero area");
    }

    NormalizedFace norm = normalize_face(raw, options.faceSize, options.boxMargin);
    DatasetEntry entry;
    entry.id = imgPath.stem().string();
    entry.image = std::move(norm.image);
    entry.landmarks = norm.toNormalized.apply(lms);
    entry.toNormalized = norm.toNormalized;
    ds.entries.push_back(std::move(entry));
  }
  return ds;
}

void prepare_dataset(Dataset& dataset, const ShapeModel& model) {
  if (dataset.landmark_count() != model.landmark_count()) {
    throw DataError("dataset has " + std::to_string(dataset.landmark_count()) +
                    " landmarks, model expects " + std::to_string(model.landmark_count()));
  }
  for (DatasetEntry& e : dataset.entries) {
    e.gtParams = shape_to_params(e.landmarks, model);
    e.meanCenter = box_canonical_params(model, e.image.faceBox);
    e.prepared = true;
  }
}

std::pair<Dataset, Dataset> split_dataset(const Dataset& dataset, double holdoutFraction) {
  if (holdoutFraction < 0.0 || holdoutFraction >= 1.0) {
    throw DataError("holdout fraction must be in [0, 1)");
  }
  std::size_t holdout = static_cast<std::size_t>(dataset.size() * holdoutFraction);
  std::size_t trainCount = dataset.size() - holdout;
  Dataset train, val;
  train.faceSize = val.faceSize = dataset.faceSize;
  train.entries.assign(dataset.entries.begin(), dataset.entries.begin() + trainCount);
  val.entries.assign(dataset.entries.begin() + trainCount, dataset.entries.end());
  return {std::move(train), std::move(val)};
}

void write_predictions(const std::vector<LandmarkSet>& predictionsNormalizedFrame,
                       const Dataset& dataset, const std::filesystem::path& outDir) {
  if (predictionsNormalizedFrame.size() != dataset.size()) {
    throw DataError("prediction count " + std::to_string(predictionsNormalizedFrame.size()) +
                    " != dataset size " + std::to_string(dataset.size()));
  }
  std::filesystem::create_directories(outDir);
  for (std::size_t i = 0; i < dataset.size(); ++i) {
    ScaleTranslate toRaw = dataset.entries[i].toNormalized.inverse();
    write_pts(outDir / (dataset.entries[i].id + ".pts"),
              toRaw.apply(predictionsNormalizedFrame[i]));
  }
}

}  // namespace sir

#include "sir/synthetic.hpp"

#include <Eigen/Dense>
#include <algorithm>
#include <cmath>

#include "sir/errors.hpp"
#include "sir/rng.hpp"

namespace sir {

namespace {

constexpr int kTemplateRadius = 8;
constexpr double kCanonicalExtent = 2.0;  // bbox extent of the generator mean

struct PatternParams {
  double orientation = 0.0;  // dipole axis
  double frequency = 1.0;    // ripple spatial frequency
};

// Continuous pattern value at offset (u, v) from the landmark center.
double pattern_value(const PatternParams& p, double u, double v) {
  const double dipoleSigma = 2.2;
  const double dipoleOffset = 2.6;
  const double rippleSigma = 3.6;
  double ex = std::cos(p.orientation), ey = std::sin(p.orientation);

  auto gauss = [](double du, double dv, double s) {
    return std::exp(-(du * du + dv * dv) / (2.0 * s * s));
  };
  double dipole = gauss(u - dipoleOffset * ex, v - dipoleOffset * ey, dipoleSigma) -
                  gauss(u + dipoleOffset * ex, v + dipoleOffset * ey, dipoleSigma);
  // Ripple axis perpendicular to the dipole axis.
  double along = -u * ey + v * ex;
  double ripple = gauss(u, v, rippleSigma) * std::cos(p.frequency * along);
  return 0.45 * dipole + 0.30 * ripple;
}

std::vector<PatternParams> make_patterns(const SyntheticSpec& spec) {
  std::vector<PatternParams> out(spec.landmarkCount);
  for (int j = 0; j < spec.landmarkCount; ++j) {
    double golden = j * 0.6180339887498949;
    out[j].orientation = 2.0 * M_PI * j / spec.landmarkCount + 0.7;
    out[j].frequency = 1.05 + 0.8 * (golden - std::floor(golden));
  }
  return out;
}

// Canonical mean: landmarks on a ring with a fixed radial modulation,
// centered and scaled to kCanonicalExtent.
Eigen::VectorXd make_generator_mean(int M) {
  Eigen::VectorXd mean(2 * M);
  for (int j = 0; j < M; ++j) {
    double angle = 2.0 * M_PI * j / M + 0.35;
    double radius = 1.0 + 0.22 * std::sin(3.1 * angle + 0.9);
    mean[2 * j] = radius * std::cos(angle);
    mean[2 * j + 1] = 0.85 * radius * std::sin(angle);
  }
  // Zero centroid.
  double cx = 0.0, cy = 0.0;
  for (int j = 0; j < M; ++j) {
    cx += mean[2 * j];
    cy += mean[2 * j + 1];
  }
  cx /= M;
  cy /= M;
  double x0 = 1e9, x1 = -1e9, y0 = 1e9, y1 = -1e9;
  for (int j = 0; j < M; ++j) {
    mean[2 * j] -= cx;
    mean[2 * j + 1] -= cy;
    x0 = std::min(x0, mean[2 * j]);
    x1 = std::max(x1, mean[2 * j]);
    y0 = std::min(y0, mean[2 * j + 1]);
    y1 = std::max(y1, mean[2 * j + 1]);
  }
  mean *= kCanonicalExtent / std::max(x1 - x0, y1 - y0);
  return mean;
}

// Random deformation directions orthogonal to the similarity tangent space
// at the mean (translations, scaling, rotation), orthonormalized.
Eigen::MatrixXd make_generator_basis(const Eigen::VectorXd& mean, int components, Rng& rng) {
  const int M = static_cast<int>(mean.size()) / 2;
  if (components > 2 * M - 4) {
    throw DataError("too many shape components for " + std::to_string(M) + " landmarks");
  }
  Eigen::MatrixXd tangent(2 * M, 4);
  for (int j = 0; j < M; ++j) {
    tangent(2 * j, 0) = 1.0;  tangent(2 * j + 1, 0) = 0.0;
    tangent(2 * j, 1) = 0.0;  tangent(2 * j + 1, 1) = 1.0;
    tangent(2 * j, 2) = mean[2 * j];      tangent(2 * j + 1, 2) = mean[2 * j + 1];
    tangent(2 * j, 3) = -mean[2 * j + 1]; tangent(2 * j + 1, 3) = mean[2 * j];
  }
  Eigen::HouseholderQR<Eigen::MatrixXd> qr(tangent);
  Eigen::MatrixXd tq = qr.householderQ() * Eigen::MatrixXd::Identity(2 * M, 4);

  Eigen::MatrixXd dirs(2 * M, components);
  for (int c = 0; c < components; ++c) {
    for (int r = 0; r < 2 * M; ++r) dirs(r, c) = rng.normal();
  }
  dirs -= tq * (tq.transpose() * dirs);
  Eigen::HouseholderQR<Eigen::MatrixXd> qr2(dirs);
  return qr2.householderQ() * Eigen::MatrixXd::Identity(2 * M, components);
}

}  // namespace

std::vector<Tensor> landmark_templates(const SyntheticSpec& spec) {
  auto patterns = make_patterns(spec);
  std::vector<Tensor> out;
  out.reserve(patterns.size());
  const int side = 2 * kTemplateRadius + 1;
  for (const PatternParams& p : patterns) {
    Tensor t({static_cast<std::size_t>(side), static_cast<std::size_t>(side), 1});
    for (int y = 0; y < side; ++y) {
      for (int x = 0; x < side; ++x) {
        t.at(y, x, 0) = pattern_value(p, x - kTemplateRadius, y - kTemplateRadius);
      }
    }
    out.push_back(std::move(t));
  }
  return out;
}

SyntheticDataset generate_dataset(const SyntheticSpec& spec) {
  if (spec.landmarkCount < 3) throw DataError("synthetic spec needs at least 3 landmarks");
  if (spec.count < 1) throw DataError("synthetic spec needs count >= 1");
  if (spec.channels != 1 && spec.channels != 3) {
    throw DataError("synthetic spec channels must be 1 or 3");
  }

  SyntheticDataset ds;
  ds.spec = spec;

  Rng setupRng(derive_seed(spec.seed, 0xB0D1));
  ds.generatorMean = make_generator_mean(spec.landmarkCount);
  ds.generatorBasis = make_generator_basis(ds.generatorMean, spec.shapeComponents, setupRng);
  ds.generatorStd = Eigen::VectorXd(spec.shapeComponents);
  for (int c = 0; c < spec.shapeComponents; ++c) {
    ds.generatorStd[c] = 0.13 * std::pow(0.72, c);
  }

  auto patterns = make_patterns(spec);
  const double S = spec.imageSize;
  const double f0 = 0.55 * S / kCanonicalExtent;
  const int M = spec.landmarkCount;

  for (int i = 0; i < spec.count; ++i) {
    Rng rng(derive_seed(spec.seed, 0x100000 + i));

    // Latent shape + pose; resample on landmark collisions.
    LandmarkSet lms;
    bool placed = false;
    for (int attempt = 0; attempt < 64 && !placed; ++attempt) {
      Eigen::VectorXd canonical = ds.generatorMean;
      for (int c = 0; c < spec.shapeComponents; ++c) {
        canonical += ds.generatorBasis.col(c) * (ds.generatorStd[c] * rng.normal());
      }
      double f = f0 * std::exp(0.10 * rng.normal());
      double beta = 0.15 * rng.normal();
      double cx = S / 2.0 + 0.03 * S * rng.normal();
      double cy = S / 2.0 + 0.03 * S * rng.normal();
      double cb = std::cos(beta), sb = std::sin(beta);
      lms.points.clear();
      for (int j = 0; j < M; ++j) {
        double x = canonical[2 * j], y = canonical[2 * j + 1];
        lms.points.push_back({f * (cb * x - sb * y) + cx, f * (sb * x + cb * y) + cy});
      }
      placed = true;
      for (int a = 0; a < M && placed; ++a) {
        for (int b = a + 1; b < M; ++b) {
          if (distance(lms.points[a], lms.points[b]) < spec.minLandmarkSeparation) {
            placed = false;
            break;
          }
        }
      }
    }
    if (!placed) {
      throw DataError("synthetic sample " + std::to_string(i) +
                      ": could not place landmarks without collisions");
    }

    // Smooth low-frequency background.
    Image img = Image::blank(spec.imageSize, spec.imageSize, spec.channels);
    double ax = rng.uniform(0.5, 1.5), ay = rng.uniform(0.5, 1.5);
    double bx = rng.uniform(1.0, 2.2), by = rng.uniform(1.0, 2.2);
    double p1 = rng.uniform(0.0, 2.0 * M_PI), p2 = rng.uniform(0.0, 2.0 * M_PI);
    for (int y = 0; y < spec.imageSize; ++y) {
      for (int x = 0; x < spec.imageSize; ++x) {
        double base = 0.45 + 0.10 * std::sin(2.0 * M_PI * (ax * x + ay * y) / S + p1) +
                      0.08 * std::cos(2.0 * M_PI * (bx * x - by * y) / S + p2);
        for (int c = 0; c < spec.channels; ++c) {
          img.at(y, x, c) = base * (1.0 - 0.06 * c);
        }
      }
    }

    // Patterns, rendered analytically at real-valued centers.
    for (int j = 0; j < M; ++j) {
      int xLo = std::max(0, static_cast<int>(std::floor(lms.points[j].x)) - kTemplateRadius - 1);
      int xHi = std::min(spec.imageSize - 1,
                         static_cast<int>(std::ceil(lms.points[j].x)) + kTemplateRadius + 1);
      int yLo = std::max(0, static_cast<int>(std::floor(lms.points[j].y)) - kTemplateRadius - 1);
      int yHi = std::min(spec.imageSize - 1,
                         static_cast<int>(std::ceil(lms.points[j].y)) + kTemplateRadius + 1);
      for (int y = yLo; y <= yHi; ++y) {
        for (int x = xLo; x <= xHi; ++x) {
          double v = pattern_value(patterns[j], x - lms.points[j].x, y - lms.points[j].y);
          for (int c = 0; c < spec.channels; ++c) {
            img.at(y, x, c) += v * (1.0 - 0.15 * c);
          }
        }
      }
    }

    // Pixel noise, then clamp into range.
    for (double& v : img.pixels) {
      if (spec.noiseStd > 0.0) v += spec.noiseStd * rng.normal();
      v = std::clamp(v, 0.0, 1.0);
    }

    img.faceBox = landmark_bounding_box(lms);
    char id[32];
    std::snprintf(id, sizeof(id), "synth%05d", i);
    ds.samples.push_back({std::move(img), std::move(lms), id});
  }
  return ds;
}

}  // namespace sir

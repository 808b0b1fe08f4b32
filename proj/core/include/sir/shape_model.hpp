#pragma once

#include <Eigen/Core>
#include <vector>

#include "sir/geometry.hpp"

namespace sir {

// Wraps an angle to (-pi, pi].
double wrap_angle(double radians);

// Pose-plus-shape coordinates of a landmark configuration:
// shape coefficients alpha (unitless), 2D translation in pixels, in-plane
// rotation in radians, and a positive scale factor.
struct PoseShapeParams {
  Eigen::VectorXd alpha;
  double tx = 0.0;
  double ty = 0.0;
  double beta = 0.0;
  double scale = 1.0;

  // Flat layout [alpha..., tx, ty, beta, scale] used by the sampler.
  Eigen::VectorXd to_vector() const;
  static PoseShapeParams from_vector(const Eigen::VectorXd& v, int components);
};

// Linear landmark model: a configuration is synthesized as
//   theta = scale * R(beta) * (meanShape + basis * alpha) + t2d
// applied per point. The canonical frame has zero centroid; basis columns are
// orthonormal and orthogonal to the similarity directions at the mean
// (translations, rotation, scaling), which makes pose/shape fitting exact for
// configurations generated by the model.
struct ShapeModel {
  Eigen::VectorXd meanShape;     // length 2M, (x1, y1, ..., xM, yM)
  Eigen::MatrixXd basis;         // 2M x P, orthonormal columns
  Eigen::VectorXd componentStd;  // length P, std-dev of training coefficients
  Eigen::VectorXd paramScales;   // length P+4, per-dimension sampling scales

  int landmark_count() const { return static_cast<int>(meanShape.size()) / 2; }
  int component_count() const { return static_cast<int>(basis.cols()); }
  LandmarkSet mean_landmarks() const;
};

// Fits the model from training shapes: generalized Procrustes alignment to a
// common frame, then PCA keeping the smallest component count whose
// cumulative variance reaches `varianceKeep`. paramScales holds componentStd
// for shape dims and the empirical std of fitted training poses for the four
// pose dims. Throws DataError for fewer than two shapes or inconsistent
// landmark counts.
ShapeModel fit_pca(const std::vector<LandmarkSet>& trainingShapes, double varianceKeep = 0.98);

// Synthesis: per point, rotate by beta, scale, translate.
LandmarkSet params_to_shape(const PoseShapeParams& params, const ShapeModel& model);

// Inverse fit: similarity pose by least squares, then shape coefficients by
// projection of the canonical residual onto the basis. Round-trips
// params_to_shape exactly up to the out-of-subspace residual. Throws
// NumericError for degenerate (single-point) configurations.
PoseShapeParams shape_to_params(const LandmarkSet& shape, const ShapeModel& model);

// Pose that inscribes the mean shape in a face box: alpha = 0, beta = 0,
// centroid at the box center, scaled so the shape's larger bounding-box
// dimension spans `fill` of the box side.
PoseShapeParams box_canonical_params(const ShapeModel& model, const FaceBox& box,
                                     double fill = 0.9);

}  // namespace sir

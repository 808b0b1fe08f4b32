#include "sir/shape_model.hpp"

#include <Eigen/Dense>
#include <Eigen/SVD>
#include <cmath>
#include <complex>

#include "sir/errors.hpp"

namespace sir {

namespace {

using ComplexShape = Eigen::VectorXcd;  // one complex number per landmark

ComplexShape to_complex(const Eigen::VectorXd& flat) {
  ComplexShape z(flat.size() / 2);
  for (Eigen::Index j = 0; j < z.size(); ++j) z[j] = {flat[2 * j], flat[2 * j + 1]};
  return z;
}

Eigen::VectorXd to_flat(const ComplexShape& z) {
  Eigen::VectorXd flat(2 * z.size());
  for (Eigen::Index j = 0; j < z.size(); ++j) {
    flat[2 * j] = z[j].real();
    flat[2 * j + 1] = z[j].imag();
  }
  return flat;
}

std::complex<double> centroid(const ComplexShape& z) { return z.mean(); }

// Least-squares similarity aligning the model mean onto the shape:
//   z ~= b * mean + t   with complex b = f * exp(i*beta), t = centroid(z).
// Solving in this direction (not shape-onto-mean) keeps the fit exact when z
// was generated from the model, because basis deviations are orthogonal to
// the mean by construction.
struct PoseFit {
  std::complex<double> b;
  std::complex<double> t;
};

PoseFit fit_pose(const ComplexShape& mean, const ComplexShape& z) {
  std::complex<double> t = centroid(z);
  std::complex<double> num = 0.0;
  double den = mean.squaredNorm();
  if (den <= 0.0) throw NumericError("shape model mean has zero extent");
  for (Eigen::Index j = 0; j < z.size(); ++j) num += std::conj(mean[j]) * (z[j] - t);
  std::complex<double> b = num / den;
  if (std::abs(b) <= 0.0) {
    throw NumericError("singular pose fit: shape has no extent relative to the mean");
  }
  return {b, t};
}

ComplexShape canonicalize(const ComplexShape& mean, const ComplexShape& z, const PoseFit& fit) {
  return (z.array() - fit.t) / fit.b;
}

}  // namespace

double wrap_angle(double radians) {
  double a = std::remainder(radians, 2.0 * M_PI);
  if (a <= -M_PI) a += 2.0 * M_PI;
  return a;
}

Eigen::VectorXd PoseShapeParams::to_vector() const {
  Eigen::VectorXd v(alpha.size() + 4);
  v.head(alpha.size()) = alpha;
  v[alpha.size() + 0] = tx;
  v[alpha.size() + 1] = ty;
  v[alpha.size() + 2] = beta;
  v[alpha.size() + 3] = scale;
  return v;
}

PoseShapeParams PoseShapeParams::from_vector(const Eigen::VectorXd& v, int components) {
  if (v.size() != components + 4) {
    throw ShapeError("pose-shape vector length " + std::to_string(v.size()) +
                     " != components+4 = " + std::to_string(components + 4));
  }
  PoseShapeParams p;
  p.alpha = v.head(components);
  p.tx = v[components + 0];
  p.ty = v[components + 1];
  p.beta = wrap_angle(v[components + 2]);
  p.scale = v[components + 3];
  return p;
}

LandmarkSet ShapeModel::mean_landmarks() const {
  return LandmarkSet::from_flat(std::span<const double>(meanShape.data(),
                                                        static_cast<std::size_t>(meanShape.size())));
}

ShapeModel fit_pca(const std::vector<LandmarkSet>& trainingShapes, double varianceKeep) {
  if (trainingShapes.size() < 2) {
    throw DataError("fit_pca needs at least 2 shapes, got " +
                    std::to_string(trainingShapes.size()));
  }
  const std::size_t M = trainingShapes[0].count();
  if (M < 2) throw DataError("fit_pca needs at least 2 landmarks per shape");
  const std::size_t N = trainingShapes.size();
  std::vector<ComplexShape> shapes;
  shapes.reserve(N);
  for (const LandmarkSet& s : trainingShapes) {
    if (s.count() != M) {
      throw DataError("fit_pca: inconsistent landmark counts (" + std::to_string(M) + " vs " +
                      std::to_string(s.count()) + ")");
    }
    auto flat = s.flat();
    shapes.push_back(to_complex(Eigen::Map<const Eigen::VectorXd>(flat.data(), flat.size())));
  }

  // Generalized Procrustes: alternate canonicalizing every shape against the
  // current mean and re-estimating the mean. The scale gauge is anchored by
  // the canonicalization itself; the rotation gauge by phase-aligning each
  // new mean to the previous one.
  ComplexShape mean = shapes[0];
  mean.array() -= centroid(mean);
  if (mean.squaredNorm() <= 0.0) throw NumericError("fit_pca: first shape is degenerate");
  std::vector<ComplexShape> canon(N);
  for (int iter = 0; iter < 50; ++iter) {
    for (std::size_t i = 0; i < N; ++i) {
      canon[i] = canonicalize(mean, shapes[i], fit_pose(mean, shapes[i]));
    }
    ComplexShape next = ComplexShape::Zero(M);
    for (const ComplexShape& z : canon) next += z;
    next /= static_cast<double>(N);
    next.array() -= centroid(next);
    std::complex<double> phase = next.dot(mean);  // conj(next) . mean
    if (std::abs(phase) > 0.0) next *= phase / std::abs(phase);
    double delta = (next - mean).norm();
    mean = next;
    if (delta < 1e-14 * std::max(1.0, mean.norm())) break;
  }

  // Final canonicalization against the converged mean; deviations are then
  // exactly orthogonal to translation/rotation/scale directions at the mean.
  std::vector<PoseFit> poses(N);
  Eigen::MatrixXd dev(2 * M, N);
  Eigen::VectorXd meanFlat = to_flat(mean);
  for (std::size_t i = 0; i < N; ++i) {
    poses[i] = fit_pose(mean, shapes[i]);
    dev.col(i) = to_flat(canonicalize(mean, shapes[i], poses[i])) - meanFlat;
  }

  // Explicitly project out the similarity tangent directions so the basis is
  // orthogonal to them to machine precision, not just to GPA tolerance.
  Eigen::MatrixXd tangent(2 * M, 4);
  for (std::size_t j = 0; j < M; ++j) {
    tangent(2 * j, 0) = 1.0;  tangent(2 * j + 1, 0) = 0.0;  // translate x
    tangent(2 * j, 1) = 0.0;  tangent(2 * j + 1, 1) = 1.0;  // translate y
    tangent(2 * j, 2) = meanFlat[2 * j];                    // scale
    tangent(2 * j + 1, 2) = meanFlat[2 * j + 1];
    tangent(2 * j, 3) = -meanFlat[2 * j + 1];               // rotate
    tangent(2 * j + 1, 3) = meanFlat[2 * j];
  }
  Eigen::HouseholderQR<Eigen::MatrixXd> qr(tangent);
  Eigen::MatrixXd tangentQ = qr.householderQ() * Eigen::MatrixXd::Identity(2 * M, 4);
  dev -= tangentQ * (tangentQ.transpose() * dev);

  Eigen::JacobiSVD<Eigen::MatrixXd> svd(dev, Eigen::ComputeThinU);
  Eigen::VectorXd sv = svd.singularValues();
  Eigen::VectorXd variances = sv.array().square() / static_cast<double>(N - 1);
  double total = variances.sum();

  int P = 0;
  if (total > 1e-24) {
    double cum = 0.0;
    while (P < variances.size()) {
      cum += variances[P];
      ++P;
      if (cum >= varianceKeep * total) break;
    }
    // Drop numerically-zero trailing components that only exist in floating
    // point noise.
    while (P > 0 && variances[P - 1] <= 1e-20 * total) --P;
  }

  ShapeModel model;
  model.meanShape = meanFlat;
  model.basis = svd.matrixU().leftCols(P);
  model.componentStd = variances.head(P).array().sqrt();

  // Sampling scales: per-component std for shape dims, empirical pose std
  // for [tx, ty, beta, scale].
  model.paramScales = Eigen::VectorXd::Zero(P + 4);
  model.paramScales.head(P) = model.componentStd;
  Eigen::ArrayXd txs(N), tys(N), betas(N), fs(N);
  for (std::size_t i = 0; i < N; ++i) {
    txs[i] = poses[i].t.real();
    tys[i] = poses[i].t.imag();
    betas[i] = std::arg(poses[i].b);
    fs[i] = std::abs(poses[i].b);
  }
  auto sampleStd = [N](const Eigen::ArrayXd& v) {
    double m = v.mean();
    return std::sqrt((v - m).square().sum() / static_cast<double>(N - 1));
  };
  model.paramScales[P + 0] = sampleStd(txs);
  model.paramScales[P + 1] = sampleStd(tys);
  model.paramScales[P + 2] = sampleStd(betas);
  model.paramScales[P + 3] = sampleStd(fs);
  return model;
}

LandmarkSet params_to_shape(const PoseShapeParams& params, const ShapeModel& model) {
  if (params.alpha.size() != model.basis.cols()) {
    throw ShapeError("alpha has " + std::to_string(params.alpha.size()) + " coefficients, model has " +
                     std::to_string(model.basis.cols()));
  }
  Eigen::VectorXd canonical = model.meanShape;
  if (params.alpha.size() > 0) canonical += model.basis * params.alpha;

  const double c = std::cos(params.beta);
  const double s = std::sin(params.beta);
  const double f = params.scale;
  LandmarkSet out;
  const int M = model.landmark_count();
  out.points.resize(M);
  for (int j = 0; j < M; ++j) {
    double x = canonical[2 * j], y = canonical[2 * j + 1];
    out.points[j] = {f * (c * x - s * y) + params.tx, f * (s * x + c * y) + params.ty};
  }
  return out;
}

PoseShapeParams shape_to_params(const LandmarkSet& shape, const ShapeModel& model) {
  if (static_cast<int>(shape.count()) != model.landmark_count()) {
    throw ShapeError("shape has " + std::to_string(shape.count()) + " landmarks, model expects " +
                     std::to_string(model.landmark_count()));
  }
  auto flat = shape.flat();
  ComplexShape z = to_complex(Eigen::Map<const Eigen::VectorXd>(flat.data(), flat.size()));
  ComplexShape mean = to_complex(model.meanShape);

  PoseFit fit = fit_pose(mean, z);
  Eigen::VectorXd residual = to_flat(canonicalize(mean, z, fit)) - model.meanShape;

  PoseShapeParams p;
  p.alpha = model.basis.transpose() * residual;
  p.tx = fit.t.real();
  p.ty = fit.t.imag();
  p.beta = wrap_angle(std::arg(fit.b));
  p.scale = std::abs(fit.b);
  return p;
}

PoseShapeParams box_canonical_params(const ShapeModel& model, const FaceBox& box, double fill) {
  if (!box.valid()) throw DataError("invalid face box (zero area)");
  const int M = model.landmark_count();
  double x0 = model.meanShape[0], x1 = x0, y0 = model.meanShape[1], y1 = y0;
  for (int j = 1; j < M; ++j) {
    x0 = std::min(x0, model.meanShape[2 * j]);
    x1 = std::max(x1, model.meanShape[2 * j]);
    y0 = std::min(y0, model.meanShape[2 * j + 1]);
    y1 = std::max(y1, model.meanShape[2 * j + 1]);
  }
  double extent = std::max(x1 - x0, y1 - y0);
  if (extent <= 0.0) throw NumericError("mean shape has zero extent");

  PoseShapeParams p;
  p.alpha = Eigen::VectorXd::Zero(model.component_count());
  p.scale = fill * box.side() / extent;
  p.beta = 0.0;
  Point2 c = box.center();
  p.tx = c.x;  // mean shape centroid is zero, so the centroid lands on the box center
  p.ty = c.y;
  return p;
}

}  // namespace sir

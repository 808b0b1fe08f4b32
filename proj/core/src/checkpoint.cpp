#include "sir/checkpoint.hpp"

#include <bit>
#include <cstring>
#include <fstream>

#include <nlohmann/json.hpp>

#include "sir/errors.hpp"

namespace sir {

namespace {

void put_bytes(std::ostream& os, const void* data, std::size_t n) {
  os.write(static_cast<const char*>(data), static_cast<std::streamsize>(n));
}

void put_u32(std::ostream& os, std::uint32_t v) {
  unsigned char b[4];
  for (int i = 0; i < 4; ++i) b[i] = static_cast<unsigned char>(v >> (8 * i));
  put_bytes(os, b, 4);
}

void put_u64(std::ostream& os, std::uint64_t v) {
  unsigned char b[8];
  for (int i = 0; i < 8; ++i) b[i] = static_cast<unsigned char>(v >> (8 * i));
  put_bytes(os, b, 8);
}

void put_f64_array(std::ostream& os, const double* data, std::size_t n) {
  if constexpr (std::endian::native == std::endian::little) {
    put_bytes(os, data, n * sizeof(double));
  } else {
    for (std::size_t i = 0; i < n; ++i) put_u64(os, std::bit_cast<std::uint64_t>(data[i]));
  }
}

void get_bytes(std::istream& is, void* data, std::size_t n, const char* what) {
  is.read(static_cast<char*>(data), static_cast<std::streamsize>(n));
  if (static_cast<std::size_t>(is.gcount()) != n) {
    throw DataError(std::string("truncated container while reading ") + what);
  }
}

std::uint32_t get_u32(std::istream& is, const char* what) {
  unsigned char b[4];
  get_bytes(is, b, 4, what);
  std::uint32_t v = 0;
  for (int i = 0; i < 4; ++i) v |= static_cast<std::uint32_t>(b[i]) << (8 * i);
  return v;
}

std::uint64_t get_u64(std::istream& is, const char* what) {
  unsigned char b[8];
  get_bytes(is, b, 8, what);
  std::uint64_t v = 0;
  for (int i = 0; i < 8; ++i) v |= static_cast<std::uint64_t>(b[i]) << (8 * i);
  return v;
}

void get_f64_array(std::istream& is, double* data, std::size_t n, const char* what) {
  if constexpr (std::endian::native == std::endian::little) {
    get_bytes(is, data, n * sizeof(double), what);
  } else {
    for (std::size_t i = 0; i < n; ++i) data[i] = std::bit_cast<double>(get_u64(is, what));
  }
}

}  // namespace

const NamedTensor* BinaryContainer::find(const std::string& name) const {
  for (const NamedTensor& t : tensors) {
    if (t.name == name) return &t;
  }
  return nullptr;
}

void write_container(const std::filesystem::path& path, const BinaryContainer& container) {
  std::ofstream os(path, std::ios::binary | std::ios::trunc);
  if (!os) throw DataError("cannot open '" + path.string() + "' for writing");

  put_bytes(os, kContainerMagic, sizeof(kContainerMagic));
  put_u32(os, kContainerVersion);
  put_u32(os, static_cast<std::uint32_t>(container.kind));
  put_u64(os, container.metaJson.size());
  put_bytes(os, container.metaJson.data(), container.metaJson.size());
  put_u64(os, container.tensors.size());
  for (const NamedTensor& t : container.tensors) {
    put_u32(os, static_cast<std::uint32_t>(t.name.size()));
    put_bytes(os, t.name.data(), t.name.size());
    put_u32(os, static_cast<std::uint32_t>(t.tensor.rank()));
    for (std::size_t d : t.tensor.shape()) put_u64(os, d);
    put_f64_array(os, t.tensor.data(), t.tensor.size());
  }
  os.flush();
  if (!os) throw DataError("short write to '" + path.string() + "'");
}

BinaryContainer read_container(const std::filesystem::path& path) {
  std::ifstream is(path, std::ios::binary);
  if (!is) throw DataError("cannot open '" + path.string() + "'");

  char magic[8];
  get_bytes(is, magic, sizeof(magic), "magic");
  if (std::memcmp(magic, kContainerMagic, sizeof(magic)) != 0) {
    throw DataError("'" + path.string() + "' is not a sir container (bad magic)");
  }
  std::uint32_t version = get_u32(is, "version");
  if (version != kContainerVersion) {
    throw DataError("unsupported container version " + std::to_string(version) + " in '" +
                    path.string() + "'");
  }

  BinaryContainer out;
  out.kind = static_cast<PayloadKind>(get_u32(is, "payload kind"));
  std::uint64_t metaLen = get_u64(is, "meta length");
  out.metaJson.resize(metaLen);
  get_bytes(is, out.metaJson.data(), metaLen, "meta");
  std::uint64_t count = get_u64(is, "tensor count");
  out.tensors.reserve(count);
  for (std::uint64_t i = 0; i < count; ++i) {
    NamedTensor nt;
    std::uint32_t nameLen = get_u32(is, "tensor name length");
    nt.name.resize(nameLen);
    get_bytes(is, nt.name.data(), nameLen, "tensor name");
    std::uint32_t rank = get_u32(is, "tensor rank");
    std::vector<std::size_t> shape(rank);
    for (std::uint32_t d = 0; d < rank; ++d) shape[d] = get_u64(is, "tensor dim");
    Tensor t(shape);
    get_f64_array(is, t.data(), t.size(), nt.name.c_str());
    nt.tensor = std::move(t);
    out.tensors.push_back(std::move(nt));
  }
  return out;
}

void save_shape_model(const std::filesystem::path& path, const ShapeModel& model) {
  BinaryContainer c;
  c.kind = PayloadKind::ShapeModel;
  nlohmann::json meta;
  meta["landmarkCount"] = model.landmark_count();
  meta["componentCount"] = model.component_count();
  c.metaJson = meta.dump();

  auto pushVec = [&c](const std::string& name, const Eigen::VectorXd& v) {
    Tensor t({static_cast<std::size_t>(v.size())});
    std::memcpy(t.data(), v.data(), sizeof(double) * v.size());
    c.tensors.push_back({name, std::move(t)});
  };
  pushVec("meanShape", model.meanShape);
  {
    // stored row-major (2M x P)
    Tensor t({static_cast<std::size_t>(model.basis.rows()),
              static_cast<std::size_t>(model.basis.cols())});
    for (Eigen::Index r = 0; r < model.basis.rows(); ++r) {
      for (Eigen::Index col = 0; col < model.basis.cols(); ++col) {
        t[static_cast<std::size_t>(r) * model.basis.cols() + col] = model.basis(r, col);
      }
    }
    c.tensors.push_back({"basis", std::move(t)});
  }
  pushVec("componentStd", model.componentStd);
  pushVec("paramScales", model.paramScales);
  write_container(path, c);
}

ShapeModel load_shape_model(const std::filesystem::path& path) {
  BinaryContainer c = read_container(path);
  if (c.kind != PayloadKind::ShapeModel) {
    throw DataError("'" + path.string() + "' does not hold a shape model");
  }
  auto need = [&c, &path](const std::string& name) -> const NamedTensor& {
    const NamedTensor* t = c.find(name);
    if (!t) throw DataError("shape model '" + path.string() + "' is missing tensor '" + name + "'");
    return *t;
  };

  ShapeModel m;
  const NamedTensor& mean = need("meanShape");
  m.meanShape = Eigen::Map<const Eigen::VectorXd>(mean.tensor.data(),
                                                  static_cast<Eigen::Index>(mean.tensor.size()));
  const NamedTensor& basis = need("basis");
  if (basis.tensor.rank() != 2) throw DataError("shape model basis must be rank 2");
  Eigen::Index rows = static_cast<Eigen::Index>(basis.tensor.dim(0));
  Eigen::Index cols = static_cast<Eigen::Index>(basis.tensor.dim(1));
  m.basis.resize(rows, cols);
  for (Eigen::Index r = 0; r < rows; ++r) {
    for (Eigen::Index col = 0; col < cols; ++col) {
      m.basis(r, col) = basis.tensor[static_cast<std::size_t>(r) * cols + col];
    }
  }
  const NamedTensor& cs = need("componentStd");
  m.componentStd = Eigen::Map<const Eigen::VectorXd>(cs.tensor.data(),
                                                     static_cast<Eigen::Index>(cs.tensor.size()));
  const NamedTensor& ps = need("paramScales");
  m.paramScales = Eigen::Map<const Eigen::VectorXd>(ps.tensor.data(),
                                                    static_cast<Eigen::Index>(ps.tensor.size()));
  if (m.meanShape.size() % 2 != 0 || m.basis.rows() != m.meanShape.size() ||
      m.componentStd.size() != m.basis.cols() ||
      m.paramScales.size() != m.basis.cols() + 4) {
    throw DataError("shape model '" + path.string() + "' has inconsistent tensor shapes");
  }
  return m;
}

}  // namespace sir

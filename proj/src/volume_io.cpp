#include "dbsloc/volume_io.hpp"

#include <algorithm>
#include <array>
#include <bit>
#include <charconv>
#include <cmath>
#include <cstring>
#include <fstream>
#include <limits>
#include <map>
#include <optional>
#include <sstream>
#include <string>
#include <string_view>
#include <type_traits>

#include <zlib.h>

#include "dbsloc/error.hpp"

namespace dbs {

namespace {

namespace fs = std::filesystem;

enum class Format { Nifti, NiftiGz, Mha, Mhd };

std::string lower(std::string s) {
  std::transform(s.begin(), s.end(), s.begin(), [](unsigned char c) { return static_cast<char>(std::tolower(c)); });
  return s;
}

bool ends_with(const std::string& s, std::string_view suffix) {
  return s.size() >= suffix.size() && s.compare(s.size() - suffix.size(), suffix.size(), suffix) == 0;
}

Format detect_format(const fs::path& path) {
  const std::string name = lower(path.filename().string());
  if (ends_with(name, ".nii.gz")) return Format::NiftiGz;
  if (ends_with(name, ".nii")) return Format::Nifti;
  if (ends_with(name, ".mha")) return Format::Mha;
  if (ends_with(name, ".mhd")) return Format::Mhd;
  throw Error(ErrorKind::Unsupported,
              path.string() + ": unsupported extension (expected .nii, .nii.gz, .mha or .mhd)");
}

// ---------------------------------------------------------------------------
// Voxel type helpers

enum class ScalarType { UInt8, Int8, Int16, UInt16, Int32, UInt32, Int64, UInt64, Float32, Float64 };

std::size_t scalar_size(ScalarType t) {
  switch (t) {
    case ScalarType::UInt8:
    case ScalarType::Int8: return 1;
    case ScalarType::Int16:
    case ScalarType::UInt16: return 2;
    case ScalarType::Int32:
    case ScalarType::UInt32:
    case ScalarType::Float32: return 4;
    case ScalarType::Int64:
    case ScalarType::UInt64:
    case ScalarType::Float64: return 8;
  }
  return 0;
}

template <typename T>
T byteswap_value(T v) {
  std::array<unsigned char, sizeof(T)> b;
  std::memcpy(b.data(), &v, sizeof(T));
  std::reverse(b.begin(), b.end());
  std::memcpy(&v, b.data(), sizeof(T));
  return v;
}

template <typename T>
void decode_as(const unsigned char* bytes, std::size_t n, bool swap, double slope, double inter,
               std::vector<float>& out) {
  const bool scaled = slope != 1.0 || inter != 0.0;
  for (std::size_t i = 0; i < n; ++i) {
    T v;
    std::memcpy(&v, bytes + i * sizeof(T), sizeof(T));
    if (swap) v = byteswap_value(v);
    out[i] = scaled ? static_cast<float>(static_cast<double>(v) * slope + inter) : static_cast<float>(v);
  }
}

std::vector<float> decode(ScalarType t, const std::vector<unsigned char>& bytes, std::size_t n, bool swap,
                          double slope, double inter) {
  std::vector<float> out(n);
  const unsigned char* p = bytes.data();
  switch (t) {
    case ScalarType::UInt8: decode_as<std::uint8_t>(p, n, swap, slope, inter, out); break;
    case ScalarType::Int8: decode_as<std::int8_t>(p, n, swap, slope, inter, out); break;
    case ScalarType::Int16: decode_as<std::int16_t>(p, n, swap, slope, inter, out); break;
    case ScalarType::UInt16: decode_as<std::uint16_t>(p, n, swap, slope, inter, out); break;
    case ScalarType::Int32: decode_as<std::int32_t>(p, n, swap, slope, inter, out); break;
    case ScalarType::UInt32: decode_as<std::uint32_t>(p, n, swap, slope, inter, out); break;
    case ScalarType::Int64: decode_as<std::int64_t>(p, n, swap, slope, inter, out); break;
    case ScalarType::UInt64: decode_as<std::uint64_t>(p, n, swap, slope, inter, out); break;
    case ScalarType::Float32: decode_as<float>(p, n, swap, slope, inter, out); break;
    case ScalarType::Float64: decode_as<double>(p, n, swap, slope, inter, out); break;
  }
  for (float v : out) {
    if (!std::isfinite(v)) throw Error(ErrorKind::Corruption, "payload contains non-finite voxel values");
  }
  return out;
}

ScalarType to_scalar(DiskType t) {
  switch (t) {
    case DiskType::UInt8: return ScalarType::UInt8;
    case DiskType::Int16: return ScalarType::Int16;
    case DiskType::Int32: return ScalarType::Int32;
    case DiskType::Float64: return ScalarType::Float64;
    case DiskType::Float32:
    case DiskType::Auto: break;
  }
  return ScalarType::Float32;
}

template <typename T>
void encode_as(std::span<const float> values, std::vector<unsigned char>& out) {
  out.resize(values.size() * sizeof(T));
  for (std::size_t i = 0; i < values.size(); ++i) {
    const float v = values[i];
    if constexpr (std::is_integral_v<T>) {
      if (v != std::nearbyint(v) || v < static_cast<float>(std::numeric_limits<T>::min()) ||
          v > static_cast<float>(std::numeric_limits<T>::max())) {
        throw Error(ErrorKind::InvalidArgument,
                    "voxel value " + std::to_string(v) + " is not representable in the requested integer type");
      }
    }
    const T t = static_cast<T>(v);
    std::memcpy(out.data() + i * sizeof(T), &t, sizeof(T));
  }
}

std::vector<unsigned char> encode(ScalarType t, std::span<const float> values) {
  static_assert(std::endian::native == std::endian::little, "writer assumes a little-endian host");
  std::vector<unsigned char> out;
  switch (t) {
    case ScalarType::UInt8: encode_as<std::uint8_t>(values, out); break;
    case ScalarType::Int16: encode_as<std::int16_t>(values, out); break;
    case ScalarType::Int32: encode_as<std::int32_t>(values, out); break;
    case ScalarType::Float64: encode_as<double>(values, out); break;
    default: encode_as<float>(values, out); break;
  }
  return out;
}

std::uint64_t checked_payload_bytes(const Dims& dims, std::size_t elem, const ReadOptions& opts,
                                    const fs::path& path) {
  std::uint64_t n = elem;
  for (auto d : dims) {
    if (d <= 0) throw Error(ErrorKind::Corruption, path.string() + ": non-positive dimension in header");
    if (n > opts.max_payload_bytes / static_cast<std::uint64_t>(d)) {
      throw Error(ErrorKind::Corruption, path.string() + ": header requests a payload larger than the " +
                                             std::to_string(opts.max_payload_bytes) + "-byte cap");
    }
    n *= static_cast<std::uint64_t>(d);
  }
  return n;
}

// ---------------------------------------------------------------------------
// NIfTI-1

#pragma pack(push, 1)
struct NiftiHeader {
  std::int32_t sizeof_hdr;
  char data_type[10];
  char db_name[18];
  std::int32_t extents;
  std::int16_t session_error;
  char regular;
  char dim_info;
  std::int16_t dim[8];
  float intent_p1, intent_p2, intent_p3;
  std::int16_t intent_code;
  std::int16_t datatype;
  std::int16_t bitpix;
  std::int16_t slice_start;
  float pixdim[8];
  float vox_offset;
  float scl_slope;
  float scl_inter;
  std::int16_t slice_end;
  char slice_code;
  char xyzt_units;
  float cal_max, cal_min;
  float slice_duration;
  float toffset;
  std::int32_t glmax, glmin;
  char descrip[80];
  char aux_file[24];
  std::int16_t qform_code;
  std::int16_t sform_code;
  float quatern_b, quatern_c, quatern_d;
  float qoffset_x, qoffset_y, qoffset_z;
  float srow_x[4];
  float srow_y[4];
  float srow_z[4];
  char intent_name[16];
  char magic[4];
};
#pragma pack(pop)
static_assert(sizeof(NiftiHeader) == 348);

void swap_header(NiftiHeader& h) {
  auto sw = [](auto& v) { v = byteswap_value(v); };
  sw(h.sizeof_hdr);
  sw(h.extents);
  sw(h.session_error);
  for (auto& d : h.dim) sw(d);
  sw(h.intent_p1); sw(h.intent_p2); sw(h.intent_p3);
  sw(h.intent_code); sw(h.datatype); sw(h.bitpix); sw(h.slice_start);
  for (auto& p : h.pixdim) sw(p);
  sw(h.vox_offset); sw(h.scl_slope); sw(h.scl_inter); sw(h.slice_end);
  sw(h.cal_max); sw(h.cal_min); sw(h.slice_duration); sw(h.toffset);
  sw(h.glmax); sw(h.glmin);
  sw(h.qform_code); sw(h.sform_code);
  sw(h.quatern_b); sw(h.quatern_c); sw(h.quatern_d);
  sw(h.qoffset_x); sw(h.qoffset_y); sw(h.qoffset_z);
  for (auto& v : h.srow_x) sw(v);
  for (auto& v : h.srow_y) sw(v);
  for (auto& v : h.srow_z) sw(v);
}

ScalarType nifti_scalar(std::int16_t code, const fs::path& path) {
  switch (code) {
    case 2: return ScalarType::UInt8;
    case 4: return ScalarType::Int16;
    case 8: return ScalarType::Int32;
    case 16: return ScalarType::Float32;
    case 64: return ScalarType::Float64;
    case 256: return ScalarType::Int8;
    case 512: return ScalarType::UInt16;
    case 768: return ScalarType::UInt32;
    case 1024: return ScalarType::Int64;
    case 1280: return ScalarType::UInt64;
    default: break;
  }
  throw Error(ErrorKind::Unsupported,
              path.string() + ": unsupported NIfTI datatype code " + std::to_string(code));
}

std::int16_t nifti_code(ScalarType t) {
  switch (t) {
    case ScalarType::UInt8: return 2;
    case ScalarType::Int16: return 4;
    case ScalarType::Int32: return 8;
    case ScalarType::Float64: return 64;
    default: return 16;
  }
}

class GzReader {
 public:
  explicit GzReader(const fs::path& path) : path_(path), f_(gzopen(path.c_str(), "rb")) {
    if (f_ == nullptr) throw Error(ErrorKind::Io, "cannot open " + path.string());
  }
  ~GzReader() {
    if (f_ != nullptr) gzclose(f_);
  }
  GzReader(const GzReader&) = delete;
  GzReader& operator=(const GzReader&) = delete;

  /// Returns the number of bytes actually read (short on EOF or stream error).
  std::size_t read(void* dst, std::size_t n) {
    auto* out = static_cast<unsigned char*>(dst);
    std::size_t total = 0;
    while (total < n) {
      const auto chunk = static_cast<unsigned>(std::min<std::size_t>(n - total, 1u << 30));
      const int got = gzread(f_, out + total, chunk);
      if (got <= 0) break;
      total += static_cast<std::size_t>(got);
    }
    return total;
  }

 private:
  fs::path path_;
  gzFile f_;
};

AffineTransform quatern_to_affine(const NiftiHeader& h) {
  const double b = h.quatern_b, c = h.quatern_c, d = h.quatern_d;
  const double a = std::sqrt(std::max(0.0, 1.0 - (b * b + c * c + d * d)));
  Eigen::Matrix3d r;
  r << a * a + b * b - c * c - d * d, 2 * (b * c - a * d), 2 * (b * d + a * c),
      2 * (b * c + a * d), a * a + c * c - b * b - d * d, 2 * (c * d - a * b),
      2 * (b * d - a * c), 2 * (c * d + a * b), a * a + d * d - b * b - c * c;
  const double qfac = h.pixdim[0] < 0 ? -1.0 : 1.0;
  const Vector3 scale(std::abs(h.pixdim[1]), std::abs(h.pixdim[2]), qfac * std::abs(h.pixdim[3]));
  return {r * scale.asDiagonal(), Vector3(h.qoffset_x, h.qoffset_y, h.qoffset_z)};
}

/// Fills the qform fields when the linear part is a scaled rotation; returns
/// false when it carries shear and no quaternion can represent it.
bool affine_to_quatern(const AffineTransform& t, NiftiHeader& h) {
  Eigen::Matrix3d r = t.linear();
  Vector3 s;
  for (int a = 0; a < 3; ++a) {
    s[a] = r.col(a).norm();
    r.col(a) /= s[a];
  }
  if ((r.transpose() * r - Eigen::Matrix3d::Identity()).cwiseAbs().maxCoeff() > 1e-6) return false;
  double qfac = 1.0;
  if (r.determinant() < 0) {
    qfac = -1.0;
    r.col(2) = -r.col(2);
  }
  Eigen::Quaterniond q(r);
  q.normalize();
  if (q.w() < 0) q.coeffs() = -q.coeffs();
  h.quatern_b = static_cast<float>(q.x());
  h.quatern_c = static_cast<float>(q.y());
  h.quatern_d = static_cast<float>(q.z());
  h.qoffset_x = static_cast<float>(t.offset().x());
  h.qoffset_y = static_cast<float>(t.offset().y());
  h.qoffset_z = static_cast<float>(t.offset().z());
  h.pixdim[0] = static_cast<float>(qfac);
  return true;
}

/// NIfTI-1 stores the sform in float32. The exact affine also travels in a
/// comment extension and is preferred on read when it agrees with the sform.
constexpr std::int32_t kCommentEcode = 6;
constexpr std::string_view kAffineTag = "dbsloc-affine";

std::vector<char> affine_extension(const AffineTransform& t) {
  std::string text(kAffineTag);
  std::array<char, 32> buf{};
  for (int r = 0; r < 3; ++r)
    for (int c = 0; c < 4; ++c) {
      const auto res = std::to_chars(buf.data(), buf.data() + buf.size(), t.matrix()(r, c));
      text += ' ';
      text.append(buf.data(), res.ptr);
    }
  const std::size_t esize = (8 + text.size() + 1 + 15) / 16 * 16;
  std::vector<char> out(4 + esize, 0);
  out[0] = 1;
  const auto size32 = static_cast<std::int32_t>(esize);
  std::memcpy(out.data() + 4, &size32, 4);
  std::memcpy(out.data() + 8, &kCommentEcode, 4);
  std::memcpy(out.data() + 12, text.data(), text.size());
  return out;
}

/// `ext` holds the bytes between the header and vox_offset.
std::optional<AffineTransform> exact_affine(const std::vector<unsigned char>& ext, bool swap,
                                            const AffineTransform& sform) {
  if (ext.size() < 4 || ext[0] == 0) return std::nullopt;
  std::size_t pos = 4;
  while (pos + 8 <= ext.size()) {
    std::int32_t esize = 0, ecode = 0;
    std::memcpy(&esize, ext.data() + pos, 4);
    std::memcpy(&ecode, ext.data() + pos + 4, 4);
    if (swap) {
      esize = byteswap_value(esize);
      ecode = byteswap_value(ecode);
    }
    if (esize < 8 || static_cast<std::size_t>(esize) > ext.size() - pos) return std::nullopt;
    const char* data = reinterpret_cast<const char*>(ext.data() + pos + 8);
    const std::string_view text(data, strnlen(data, static_cast<std::size_t>(esize) - 8));
    if (ecode == kCommentEcode && text.starts_with(kAffineTag)) {
      Eigen::Matrix4d m = Eigen::Matrix4d::Identity();
      const char* p = text.data() + kAffineTag.size();
      const char* end = text.data() + text.size();
      for (int i = 0; i < 12; ++i) {
        while (p < end && *p == ' ') ++p;
        const auto res = std::from_chars(p, end, m(i / 4, i % 4));
        if (res.ec != std::errc()) return std::nullopt;
        p = res.ptr;
      }
      const Eigen::Matrix4d d = (m - sform.matrix()).cwiseAbs();
      const Eigen::Matrix4d bound = 1e-6 * m.cwiseAbs().cwiseMax(1.0);
      if ((d.array() > bound.array()).any()) return std::nullopt;
      return AffineTransform(m);
    }
    pos += static_cast<std::size_t>(esize);
  }
  return std::nullopt;
}

Volume read_nifti(const fs::path& path, const ReadOptions& opts) {
  GzReader in(path);
  NiftiHeader h{};
  if (in.read(&h, sizeof h) != sizeof h) {
    throw Error(ErrorKind::Format, path.string() + ": file shorter than a NIfTI-1 header");
  }
  bool swap = false;
  if (h.sizeof_hdr != 348) {
    if (byteswap_value(h.sizeof_hdr) != 348) {
      throw Error(ErrorKind::Format, path.string() + ": sizeof_hdr is not 348; not a NIfTI-1 file");
    }
    swap = true;
    swap_header(h);
  }
  const bool single = std::memcmp(h.magic, "n+1\0", 4) == 0;
  const bool pair = std::memcmp(h.magic, "ni1\0", 4) == 0;
  if (!single && !pair) throw Error(ErrorKind::Format, path.string() + ": bad NIfTI magic");
  if (pair) throw Error(ErrorKind::Unsupported, path.string() + ": two-file (.hdr/.img) NIfTI is not supported");

  if (h.dim[0] < 1 || h.dim[0] > 7) {
    throw Error(ErrorKind::Corruption, path.string() + ": dim[0] out of range");
  }
  Dims dims{1, 1, 1};
  for (int a = 0; a < h.dim[0]; ++a) {
    const std::int64_t d = h.dim[a + 1];
    if (d <= 0) throw Error(ErrorKind::Corruption, path.string() + ": non-positive dimension in header");
    if (a < 3) {
      dims[static_cast<std::size_t>(a)] = d;
    } else if (d != 1) {
      throw Error(ErrorKind::Unsupported, path.string() + ": only scalar 3-D volumes are supported");
    }
  }
  const ScalarType type = nifti_scalar(h.datatype, path);
  const std::size_t elem = scalar_size(type);
  if (h.bitpix != static_cast<std::int16_t>(8 * elem)) {
    throw Error(ErrorKind::Corruption, path.string() + ": bitpix inconsistent with datatype");
  }
  const std::uint64_t payload = checked_payload_bytes(dims, elem, opts, path);

  const double vox_offset = h.vox_offset;
  if (!(vox_offset >= 352.0) || vox_offset > 1e9) {
    throw Error(ErrorKind::Corruption, path.string() + ": invalid vox_offset");
  }
  std::vector<unsigned char> skip(static_cast<std::size_t>(vox_offset) - sizeof h);
  if (in.read(skip.data(), skip.size()) != skip.size()) {
    throw Error(ErrorKind::Corruption, path.string() + ": truncated before voxel data");
  }
  std::vector<unsigned char> bytes(static_cast<std::size_t>(payload));
  if (in.read(bytes.data(), bytes.size()) != bytes.size()) {
    throw Error(ErrorKind::Corruption, path.string() + ": payload shorter than header dims x datatype");
  }

  AffineTransform affine;
  if (h.sform_code > 0) {
    Eigen::Matrix4d m = Eigen::Matrix4d::Identity();
    for (int c = 0; c < 4; ++c) {
      m(0, c) = h.srow_x[c];
      m(1, c) = h.srow_y[c];
      m(2, c) = h.srow_z[c];
    }
    affine = AffineTransform(m);
    if (auto exact = exact_affine(skip, swap, affine)) affine = *exact;
  } else if (h.qform_code > 0) {
    affine = quatern_to_affine(h);
  } else {
    Vector3 s;
    for (int a = 0; a < 3; ++a) s[a] = h.pixdim[a + 1] > 0 ? h.pixdim[a + 1] : 1.0;
    affine = AffineTransform::scaling(s);
  }
  if (!affine.is_invertible()) throw Error(ErrorKind::Corruption, path.string() + ": singular orientation");

  double slope = h.scl_slope, inter = h.scl_inter;
  if (slope == 0.0 || !std::isfinite(slope)) {
    slope = 1.0;
    inter = 0.0;
  }
  if (!std::isfinite(inter)) inter = 0.0;
  auto data = decode(type, bytes, static_cast<std::size_t>(payload / elem), swap, slope, inter);
  std::optional<std::pair<float, float>> hint;
  if (h.cal_max > h.cal_min) hint = std::make_pair(h.cal_min, h.cal_max);
  return {GridSpec::from_affine(dims, affine), std::move(data), hint};
}

void write_all(gzFile f, const void* data, std::size_t n, const fs::path& path) {
  const auto* p = static_cast<const unsigned char*>(data);
  while (n > 0) {
    const auto chunk = static_cast<unsigned>(std::min<std::size_t>(n, 1u << 30));
    if (gzwrite(f, p, chunk) != static_cast<int>(chunk)) throw Error(ErrorKind::Io, "failed writing " + path.string());
    p += chunk;
    n -= chunk;
  }
}

void write_nifti(const Volume& v, const fs::path& path, ScalarType type, bool gz) {
  NiftiHeader h{};
  h.sizeof_hdr = 348;
  h.regular = 'r';
  h.dim[0] = 3;
  for (int a = 0; a < 3; ++a) {
    if (v.dims()[static_cast<std::size_t>(a)] > std::numeric_limits<std::int16_t>::max()) {
      throw Error(ErrorKind::InvalidArgument, "dimension exceeds NIfTI-1 limit");
    }
    h.dim[a + 1] = static_cast<std::int16_t>(v.dims()[static_cast<std::size_t>(a)]);
    h.pixdim[a + 1] = static_cast<float>(v.spacing()[static_cast<std::size_t>(a)]);
  }
  for (int a = 4; a < 8; ++a) h.dim[a] = 1;
  h.pixdim[0] = 1.0f;
  h.datatype = nifti_code(type);
  h.bitpix = static_cast<std::int16_t>(8 * scalar_size(type));
  const auto extension = affine_extension(v.voxel_to_world());
  h.vox_offset = static_cast<float>(sizeof h + extension.size());
  h.scl_slope = 1.0f;
  h.scl_inter = 0.0f;
  h.xyzt_units = 2;  // mm
  if (const auto& hint = v.intensity_range_hint()) {
    h.cal_min = hint->first;
    h.cal_max = hint->second;
  }
  std::strncpy(h.descrip, "dbsloc", sizeof h.descrip);
  const auto& m = v.voxel_to_world().matrix();
  h.sform_code = 1;
  for (int c = 0; c < 4; ++c) {
    h.srow_x[c] = static_cast<float>(m(0, c));
    h.srow_y[c] = static_cast<float>(m(1, c));
    h.srow_z[c] = static_cast<float>(m(2, c));
  }
  h.qform_code = affine_to_quatern(v.voxel_to_world(), h) ? 1 : 0;
  std::memcpy(h.magic, "n+1\0", 4);

  const auto payload = encode(type, v.data());
  gzFile f = gzopen(path.c_str(), gz ? "wb6" : "wbT");
  if (f == nullptr) throw Error(ErrorKind::Io, "cannot open " + path.string() + " for writing");
  try {
    write_all(f, &h, sizeof h, path);
    write_all(f, extension.data(), extension.size(), path);
    write_all(f, payload.data(), payload.size(), path);
  } catch (...) {
    gzclose(f);
    throw;
  }
  if (gzclose(f) != Z_OK) throw Error(ErrorKind::Io, "failed closing " + path.string());
}

// ---------------------------------------------------------------------------
// MetaImage

const Eigen::Matrix3d kLpsToRas = Vector3(-1.0, -1.0, 1.0).asDiagonal();

std::string trim(std::string_view s) {
  const auto b = s.find_first_not_of(" \t\r\n");
  if (b == std::string_view::npos) return {};
  const auto e = s.find_last_not_of(" \t\r\n");
  return std::string(s.substr(b, e - b + 1));
}

std::vector<double> parse_numbers(const std::string& value, std::size_t expected, const std::string& key,
                                  const fs::path& path) {
  std::istringstream ss(value);
  std::vector<double> out;
  double d;
  while (ss >> d) out.push_back(d);
  if (!ss.eof() || out.size() != expected) {
    throw Error(ErrorKind::Format, path.string() + ": malformed MetaImage field " + key + " = " + value);
  }
  return out;
}

bool parse_bool(const std::string& value) {
  const std::string v = lower(value);
  return v == "true" || v == "1";
}

ScalarType meta_scalar(const std::string& name, const fs::path& path) {
  static const std::map<std::string, ScalarType> table{
      {"MET_UCHAR", ScalarType::UInt8},   {"MET_CHAR", ScalarType::Int8},
      {"MET_SHORT", ScalarType::Int16},   {"MET_USHORT", ScalarType::UInt16},
      {"MET_INT", ScalarType::Int32},     {"MET_UINT", ScalarType::UInt32},
      {"MET_LONG_LONG", ScalarType::Int64}, {"MET_ULONG_LONG", ScalarType::UInt64},
      {"MET_FLOAT", ScalarType::Float32}, {"MET_DOUBLE", ScalarType::Float64},
  };
  const auto it = table.find(name);
  if (it == table.end()) {
    throw Error(ErrorKind::Unsupported, path.string() + ": unsupported MetaImage ElementType " + name);
  }
  return it->second;
}

std::string meta_name(ScalarType t) {
  switch (t) {
    case ScalarType::UInt8: return "MET_UCHAR";
    case ScalarType::Int16: return "MET_SHORT";
    case ScalarType::Int32: return "MET_INT";
    case ScalarType::Float64: return "MET_DOUBLE";
    default: return "MET_FLOAT";
  }
}

Volume read_meta(const fs::path& path, const ReadOptions& opts) {
  std::ifstream in(path, std::ios::binary);
  if (!in) throw Error(ErrorKind::Io, "cannot open " + path.string());

  std::map<std::string, std::string> fields;
  std::string line;
  bool found_data_key = false;
  while (std::getline(in, line)) {
    const auto eq = line.find('=');
    if (eq == std::string::npos) {
      if (trim(line).empty()) continue;
      throw Error(ErrorKind::Format, path.string() + ": malformed MetaImage header line: " + trim(line));
    }
    const std::string key = trim(std::string_view(line).substr(0, eq));
    fields[key] = trim(std::string_view(line).substr(eq + 1));
    if (key == "ElementDataFile") {
      found_data_key = true;
      break;
    }
    if (fields.size() > 256) throw Error(ErrorKind::Format, path.string() + ": MetaImage header too long");
  }
  if (!found_data_key || !fields.contains("ObjectType") || !fields.contains("NDims")) {
    throw Error(ErrorKind::Format, path.string() + ": not a MetaImage header");
  }
  auto get = [&](const char* key) -> const std::string* {
    const auto it = fields.find(key);
    return it == fields.end() ? nullptr : &it->second;
  };
  if (*get("NDims") != "3") {
    throw Error(ErrorKind::Unsupported, path.string() + ": only NDims = 3 is supported");
  }
  if (const auto* c = get("CompressedData"); c && parse_bool(*c)) {
    throw Error(ErrorKind::Unsupported, path.string() + ": compressed MetaImage payloads are not supported");
  }
  if (const auto* ch = get("ElementNumberOfChannels"); ch && *ch != "1") {
    throw Error(ErrorKind::Unsupported, path.string() + ": multi-channel voxels are not supported");
  }
  const auto* dim_str = get("DimSize");
  const auto* type_str = get("ElementType");
  if (!dim_str || !type_str) throw Error(ErrorKind::Format, path.string() + ": missing DimSize or ElementType");

  const auto dimv = parse_numbers(*dim_str, 3, "DimSize", path);
  Dims dims;
  for (int a = 0; a < 3; ++a) {
    if (dimv[a] != std::floor(dimv[a]) || dimv[a] < 1 || dimv[a] > 1e9) {
      throw Error(ErrorKind::Corruption, path.string() + ": invalid DimSize");
    }
    dims[static_cast<std::size_t>(a)] = static_cast<std::int64_t>(dimv[a]);
  }
  const ScalarType type = meta_scalar(*type_str, path);
  const std::uint64_t payload = checked_payload_bytes(dims, scalar_size(type), opts, path);

  Vector3 spacing(1, 1, 1);
  const std::string* sp = get("ElementSpacing");
  if (!sp) sp = get("ElementSize");
  if (sp) {
    const auto s = parse_numbers(*sp, 3, "ElementSpacing", path);
    spacing = Vector3(s[0], s[1], s[2]);
  }
  Vector3 offset = Vector3::Zero();
  for (const char* key : {"Offset", "Position", "Origin"}) {
    if (const auto* o = get(key)) {
      const auto v = parse_numbers(*o, 3, key, path);
      offset = Vector3(v[0], v[1], v[2]);
      break;
    }
  }
  Eigen::Matrix3d dir = Eigen::Matrix3d::Identity();
  for (const char* key : {"TransformMatrix", "Rotation", "Orientation"}) {
    if (const auto* t = get(key)) {
      const auto v = parse_numbers(*t, 9, key, path);
      for (int c = 0; c < 3; ++c)
        for (int r = 0; r < 3; ++r) dir(r, c) = v[static_cast<std::size_t>(c * 3 + r)];
      break;
    }
  }
  const bool msb = get("BinaryDataByteOrderMSB") && parse_bool(*get("BinaryDataByteOrderMSB"));
  const bool swap = msb != (std::endian::native == std::endian::big);

  std::vector<unsigned char> bytes(static_cast<std::size_t>(payload));
  const std::string data_file = fields["ElementDataFile"];
  if (data_file == "LOCAL") {
    in.read(reinterpret_cast<char*>(bytes.data()), static_cast<std::streamsize>(bytes.size()));
    if (static_cast<std::uint64_t>(in.gcount()) != payload) {
      throw Error(ErrorKind::Corruption, path.string() + ": payload shorter than DimSize x ElementType");
    }
  } else {
    if (data_file.find(' ') != std::string::npos || data_file == "LIST") {
      throw Error(ErrorKind::Unsupported, path.string() + ": multi-file MetaImage data is not supported");
    }
    const fs::path raw = fs::path(data_file).is_absolute() ? fs::path(data_file) : path.parent_path() / data_file;
    std::ifstream rin(raw, std::ios::binary);
    if (!rin) throw Error(ErrorKind::Io, "cannot open MetaImage data file " + raw.string());
    rin.read(reinterpret_cast<char*>(bytes.data()), static_cast<std::streamsize>(bytes.size()));
    if (static_cast<std::uint64_t>(rin.gcount()) != payload) {
      throw Error(ErrorKind::Corruption, raw.string() + ": payload shorter than DimSize x ElementType");
    }
  }

  const Eigen::Matrix3d lin_lps = dir * spacing.asDiagonal();
  const AffineTransform affine(kLpsToRas * lin_lps, kLpsToRas * offset);
  if (!affine.is_invertible()) throw Error(ErrorKind::Corruption, path.string() + ": singular orientation");
  auto data = decode(type, bytes, static_cast<std::size_t>(payload / scalar_size(type)), swap, 1.0, 0.0);
  GridSpec grid;
  grid.dims = dims;
  grid.spacing = {spacing[0], spacing[1], spacing[2]};
  grid.voxel_to_world = affine;
  return {grid, std::move(data)};
}

std::string fmt_double(double v) {
  std::array<char, 64> buf;
  const auto res = std::to_chars(buf.data(), buf.data() + buf.size(), v);
  return std::string(buf.data(), res.ptr);
}

template <typename Range>
std::string join_numbers(const Range& r) {
  std::string out;
  for (const auto& v : r) {
    if (!out.empty()) out += ' ';
    out += fmt_double(static_cast<double>(v));
  }
  return out;
}

void write_meta(const Volume& v, const fs::path& path, ScalarType type, bool detached) {
  const Eigen::Matrix3d lin_lps = kLpsToRas * v.voxel_to_world().linear();
  const Vector3 offset_lps = kLpsToRas * v.voxel_to_world().offset();
  std::vector<double> tm;
  for (int c = 0; c < 3; ++c)
    for (int r = 0; r < 3; ++r) tm.push_back(lin_lps(r, c) / v.spacing()[static_cast<std::size_t>(c)]);

  fs::path raw = path;
  raw.replace_extension(".raw");

  std::ostringstream hdr;
  hdr << "ObjectType = Image\n"
      << "NDims = 3\n"
      << "BinaryData = True\n"
      << "BinaryDataByteOrderMSB = False\n"
      << "CompressedData = False\n"
      << "TransformMatrix = " << join_numbers(tm) << '\n'
      << "Offset = " << join_numbers(std::array{offset_lps.x(), offset_lps.y(), offset_lps.z()}) << '\n'
      << "CenterOfRotation = 0 0 0\n"
      << "ElementSpacing = " << join_numbers(v.spacing()) << '\n'
      << "DimSize = " << join_numbers(v.dims()) << '\n'
      << "ElementType = " << meta_name(type) << '\n'
      << "ElementDataFile = " << (detached ? raw.filename().string() : std::string("LOCAL")) << '\n';

  const auto payload = encode(type, v.data());
  std::ofstream out(path, std::ios::binary);
  if (!out) throw Error(ErrorKind::Io, "cannot open " + path.string() + " for writing");
  out << hdr.str();
  if (detached) {
    std::ofstream rout(raw, std::ios::binary);
    if (!rout) throw Error(ErrorKind::Io, "cannot open " + raw.string() + " for writing");
    rout.write(reinterpret_cast<const char*>(payload.data()), static_cast<std::streamsize>(payload.size()));
    if (!rout) throw Error(ErrorKind::Io, "failed writing " + raw.string());
  } else {
    out.write(reinterpret_cast<const char*>(payload.data()), static_cast<std::streamsize>(payload.size()));
  }
  if (!out) throw Error(ErrorKind::Io, "failed writing " + path.string());
}

}  // namespace

DiskType choose_disk_type(const Volume& volume) {
  for (float v : volume.data()) {
    if (v != std::nearbyint(v) || v < -32768.0f || v > 32767.0f) return DiskType::Float32;
  }
  return DiskType::Int16;
}

Volume read_volume(const fs::path& path, const ReadOptions& options) {
  if (!fs::exists(path)) throw Error(ErrorKind::Io, "no such file: " + path.string());
  switch (detect_format(path)) {
    case Format::Nifti:
    case Format::NiftiGz: return read_nifti(path, options);
    case Format::Mha:
    case Format::Mhd: return read_meta(path, options);
  }
  throw Error(ErrorKind::Unsupported, path.string());
}

void write_volume(const Volume& volume, const fs::path& path, const WriteOptions& options) {
  const Format format = detect_format(path);
  const DiskType disk = options.type == DiskType::Auto ? choose_disk_type(volume) : options.type;
  const ScalarType type = to_scalar(disk);
  switch (format) {
    case Format::Nifti: write_nifti(volume, path, type, false); break;
    case Format::NiftiGz: write_nifti(volume, path, type, true); break;
    case Format::Mha: write_meta(volume, path, type, false); break;
    case Format::Mhd: write_meta(volume, path, type, true); break;
  }
}

}  // namespace dbs

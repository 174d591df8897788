#pragma once

#include <cstdint>
#include <filesystem>

#include "dbsloc/volume.hpp"

namespace dbs {

/// On-disk voxel type used when writing.
enum class DiskType {
  Auto,  ///< int16 when every value is an integer in range, else float32
  UInt8,
  Int16,
  Int32,
  Float32,
  Float64,
};

struct ReadOptions {
  /// Upper bound on the payload size a header may request.
  std::uint64_t max_payload_bytes = std::uint64_t{4} << 30;
};

struct WriteOptions {
  DiskType type = DiskType::Auto;
};

/// Reads .nii, .nii.gz, .mha or .mhd. NIfTI world coordinates are taken as
/// RAS+ (sform preferred over qform). MetaImage world coordinates follow the
/// ITK LPS convention and are converted to RAS+ on read.
Volume read_volume(const std::filesystem::path& path, const ReadOptions& options = {});

/// Writes by extension. For .mhd the payload goes to a sibling .raw file.
void write_volume(const Volume& volume, const std::filesystem::path& path,
                  const WriteOptions& options = {});

/// Resolves DiskType::Auto for a given volume.
DiskType choose_disk_type(const Volume& volume);

}  // namespace dbs

#pragma once

#include <filesystem>
#include <string>

#include "medregion/volume.hpp"

namespace medregion {

// Reads an uncompressed or gzip-compressed NIfTI-1 volume (".nii", ".nii.gz",
// or a ".hdr"/".img" pair). Dims are reordered to (D,H,W) with D = dim[3].
// When scl_slope is nonzero and not the identity the data is rescaled and the
// result is float32.
VolumeTensor load_nifti(const std::filesystem::path& path,
                        VolumeKind kind = VolumeKind::kImage);

// Writes a single-file NIfTI-1 volume; gzip-compressed if the path ends in
// ".gz".
void save_nifti(const VolumeTensor& vol, const std::filesystem::path& path);

// Raw container: <name>.json header + <name>.bin little-endian payload.
VolumeTensor load_raw_container(const std::filesystem::path& header_path);
void save_raw_container(const VolumeTensor& vol,
                        const std::filesystem::path& header_path);
std::filesystem::path raw_payload_path(const std::filesystem::path& header_path);

// Dispatches on the extension: ".json" is a raw container, anything else
// NIfTI. NIfTI files carry no kind, so `kind` is applied to them.
VolumeTensor load_volume(const std::filesystem::path& path,
                         VolumeKind kind = VolumeKind::kImage);

// Per-volume min-max scaling to [0,1], float32. A constant volume maps to all
// zeros.
VolumeTensor normalize_minmax(const VolumeTensor& vol);

// Trilinear (image) or nearest-neighbour (mask) resampling to `target`.
// Spacing is rescaled so the physical extent is preserved.
VolumeTensor resize_volume(const VolumeTensor& vol, const Dims& target,
                           VolumeKind kind);

// Loads the manifest {"ct":..., "regions":{"1".."6"}, "lesions":{}, "organs":{}}.
// Relative paths resolve against the manifest's directory.
RegionMaskSet load_mask_set(const std::filesystem::path& manifest_path);
Study load_study(const std::filesystem::path& manifest_path);

// Writes every volume of the study as raw containers under `dir` together with
// a manifest referencing them; returns the manifest path.
std::filesystem::path save_study(const Study& study,
                                 const std::filesystem::path& dir);

}  // namespace medregion

#pragma once

#include <cstdint>
#include <span>
#include <string>
#include <vector>

#include "snnlab/tensor.hpp"

namespace snnlab {

struct Dataset {
    Tensor images;            // [N, dims...], values in [0,1]
    std::vector<int> labels;  // in [0, classes)
    int classes = 0;

    std::int64_t size() const { return images.defined() ? images.dim(0) : 0; }
    Shape sample_shape() const;  // dims without the batch axis

    // Batch assembly: rows at the given indices, plus their labels.
    Tensor gather(std::span<const std::int64_t> idx) const;
    std::vector<int> gather_labels(std::span<const std::int64_t> idx) const;

    // First n samples as a view-copy (probe/eval subsets).
    Dataset head(std::int64_t n) const;
};

enum class SyntheticKind { stripes, blobs, xor_patch };

SyntheticKind synthetic_kind_from_name(const std::string& name);

// Deterministic labeled image sets in [0,1], class-balanced within one.
//   stripes    oriented stripe patterns; linearly separable, easy
//   blobs      one bright blob per class anchor with jitter and background
//              noise; moderately attackable
//   xor-patch  two patches, label = brightness parity; 2 classes only
Dataset generate_synthetic(SyntheticKind kind, int n, int image_size, int classes,
                           std::uint64_t seed);

// Binary tensor/label container.
//   images: magic "TDS1", u8 dtype code (1 = f64 little-endian), u8 rank,
//           u32 dims[rank], then the row-major payload
//   labels: magic "TLB1", u32 n, u32 class count, then n * u32
void save_dataset(const Dataset& ds, const std::string& images_path,
                  const std::string& labels_path);
Dataset load_dataset(const std::string& images_path, const std::string& labels_path);

}  // namespace snnlab

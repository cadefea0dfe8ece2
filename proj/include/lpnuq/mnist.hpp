#pragma once

#include <cstdint>
#include <stdexcept>
#include <string>
#include <vector>

#include "lpnuq/common.hpp"

namespace lpnuq {

/// Malformed IDX input (bad magic, truncation, dimension mismatch, ...).
struct IdxFormatError : std::runtime_error {
    using std::runtime_error::runtime_error;
};

struct FileStamp {
    std::string path;
    std::uint64_t checksum = 0; // FNV-1a over the raw bytes
};

struct LabeledDataset {
    std::vector<Vec> images; // each image_side^2, values in [0,1]
    std::vector<int> labels; // 0..9
    std::vector<FileStamp> provenance;

    std::size_t size() const { return images.size(); }
};

std::uint64_t fnv1a64(const std::uint8_t* data, std::size_t len);

/// Parse an IDX image file (magic 0x00000803, dims count x 28 x 28,
/// one byte per pixel). Pixels are normalized by 1/255.
std::vector<Vec> parse_idx_images(const std::vector<std::uint8_t>& bytes);

/// Parse an IDX label file (magic 0x00000801). Labels must be 0..9.
std::vector<int> parse_idx_labels(const std::vector<std::uint8_t>& bytes);

/// Read and pair an image file with its label file.
LabeledDataset load_dataset(const std::string& images_path,
                            const std::string& labels_path);

struct SplitConfig {
    int train_digit = 0;
    int eval_per_digit = 10;
    std::uint64_t seed = 0;
};

struct Splits {
    LabeledDataset train; // every train-file image of train_digit
    LabeledDataset eval;  // eval_per_digit seeded picks per digit, test file
};

/// Build the train/eval splits. Training images come from the training
/// file only and evaluation images from the test file only, so the two
/// sets are disjoint by construction.
Splits make_splits(const LabeledDataset& train_data,
                   const LabeledDataset& eval_data,
                   const SplitConfig& cfg = {});

} // namespace lpnuq

#include "lpnuq/mnist.hpp"

#include <cstdio>
#include <fstream>

#include "lpnuq/rng.hpp"

namespace lpnuq {

namespace {

constexpr std::uint32_t kImagesMagic = 0x00000803;
constexpr std::uint32_t kLabelsMagic = 0x00000801;
constexpr int kSide = 28;

std::uint32_t read_be32(const std::vector<std::uint8_t>& b, std::size_t off)
{
    return (std::uint32_t(b[off]) << 24) | (std::uint32_t(b[off + 1]) << 16)
        | (std::uint32_t(b[off + 2]) << 8) | std::uint32_t(b[off + 3]);
}

std::vector<std::uint8_t> read_file(const std::string& path)
{
    std::ifstream in(path, std::ios::binary);
    if (!in)
        throw std::runtime_error("cannot open " + path);
    std::vector<std::uint8_t> bytes(
        (std::istreambuf_iterator<char>(in)), std::istreambuf_iterator<char>());
    return bytes;
}

} // namespace

std::uint64_t fnv1a64(const std::uint8_t* data, std::size_t len)
{
    std::uint64_t h = 14695981039346532101ull;
    for (std::size_t i = 0; i < len; ++i) {
        h ^= data[i];
        h *= 1099511628211ull;
    }
    return h;
}

std::vector<Vec> parse_idx_images(const std::vector<std::uint8_t>& bytes)
{
    if (bytes.size() < 16)
        throw IdxFormatError("idx images: truncated header");
    const std::uint32_t magic = read_be32(bytes, 0);
    if (magic != kImagesMagic) {
        char buf[64];
        std::snprintf(buf, sizeof(buf), "idx images: bad magic 0x%08x", magic);
        throw IdxFormatError(buf);
    }
    const std::uint64_t count = read_be32(bytes, 4);
    const std::uint32_t rows = read_be32(bytes, 8);
    const std::uint32_t cols = read_be32(bytes, 12);
    if (rows != kSide || cols != kSide)
        throw IdxFormatError("idx images: expected 28x28 images");
    const std::uint64_t expected = 16 + count * kSide * kSide;
    if (bytes.size() != expected)
        throw IdxFormatError("idx images: payload size mismatch");

    std::vector<Vec> images;
    images.reserve(count);
    std::size_t off = 16;
    for (std::uint64_t i = 0; i < count; ++i) {
        Vec img(kSide * kSide);
        for (int p = 0; p < kSide * kSide; ++p)
            img[p] = bytes[off + static_cast<std::size_t>(p)] / 255.0;
        off += kSide * kSide;
        images.push_back(std::move(img));
    }
    return images;
}

std::vector<int> parse_idx_labels(const std::vector<std::uint8_t>& bytes)
{
    if (bytes.size() < 8)
        throw IdxFormatError("idx labels: truncated header");
    const std::uint32_t magic = read_be32(bytes, 0);
    if (magic != kLabelsMagic) {
        char buf[64];
        std::snprintf(buf, sizeof(buf), "idx labels: bad magic 0x%08x", magic);
        throw IdxFormatError(buf);
    }
    const std::uint64_t count = read_be32(bytes, 4);
    if (bytes.size() != 8 + count)
        throw IdxFormatError("idx labels: payload size mismatch");
    std::vector<int> labels;
    labels.reserve(count);
    for (std::uint64_t i = 0; i < count; ++i) {
        const int v = bytes[8 + i];
        if (v > 9)
            throw IdxFormatError("idx labels: label out of range");
        labels.push_back(v);
    }
    return labels;
}

LabeledDataset load_dataset(const std::string& images_path,
                            const std::string& labels_path)
{
    const auto ibytes = read_file(images_path);
    const auto lbytes = read_file(labels_path);
    LabeledDataset ds;
    ds.images = parse_idx_images(ibytes);
    ds.labels = parse_idx_labels(lbytes);
    if (ds.images.size() != ds.labels.size())
        throw IdxFormatError("image/label count mismatch");
    ds.provenance = {
        {images_path, fnv1a64(ibytes.data(), ibytes.size())},
        {labels_path, fnv1a64(lbytes.data(), lbytes.size())},
    };
    return ds;
}

Splits make_splits(const LabeledDataset& train_data,
                   const LabeledDataset& eval_data, const SplitConfig& cfg)
{
    if (cfg.train_digit < 0 || cfg.train_digit > 9)
        throw std::invalid_argument("make_splits: train_digit out of range");
    if (cfg.eval_per_digit <= 0)
        throw std::invalid_argument("make_splits: eval_per_digit must be positive");

    Splits out;
    out.train.provenance = train_data.provenance;
    for (std::size_t i = 0; i < train_data.size(); ++i) {
        if (train_data.labels[i] == cfg.train_digit) {
            out.train.images.push_back(train_data.images[i]);
            out.train.labels.push_back(train_data.labels[i]);
        }
    }
    if (out.train.size() == 0)
        throw std::runtime_error("make_splits: no training images of requested digit");

    out.eval.provenance = eval_data.provenance;
    Rng rng(cfg.seed);
    for (int d = 0; d <= 9; ++d) {
        std::vector<std::size_t> pool;
        for (std::size_t i = 0; i < eval_data.size(); ++i)
            if (eval_data.labels[i] == d)
                pool.push_back(i);
        if (pool.size() < static_cast<std::size_t>(cfg.eval_per_digit))
            throw std::runtime_error(
                "make_splits: not enough eval images of digit " + std::to_string(d));
        const auto picks = rng.sample_without_replacement(
            static_cast<int>(pool.size()), cfg.eval_per_digit);
        for (int p : picks) {
            out.eval.images.push_back(eval_data.images[pool[static_cast<std::size_t>(p)]]);
            out.eval.labels.push_back(d);
        }
    }
    return out;
}

} // namespace lpnuq

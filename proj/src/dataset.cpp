#include "snnlab/dataset.hpp"

#include <algorithm>
#include <cmath>

#include "snnlab/error.hpp"
#include "snnlab/fsio.hpp"
#include "snnlab/rng.hpp"

namespace snnlab {

Shape Dataset::sample_shape() const {
    return Shape(images.shape().begin() + 1, images.shape().end());
}

Tensor Dataset::gather(std::span<const std::int64_t> idx) const {
    const std::int64_t d = images.numel() / size();
    Shape out_shape = images.shape();
    out_shape[0] = static_cast<std::int64_t>(idx.size());
    Tensor out(out_shape);
    auto ov = out.data();
    auto iv = images.data();
    for (std::size_t r = 0; r < idx.size(); ++r) {
        const std::int64_t i = idx[r];
        if (i < 0 || i >= size()) throw ContractError("gather index out of range");
        std::copy(iv.begin() + i * d, iv.begin() + (i + 1) * d,
                  ov.begin() + static_cast<std::int64_t>(r) * d);
    }
    return out;
}

std::vector<int> Dataset::gather_labels(std::span<const std::int64_t> idx) const {
    std::vector<int> out(idx.size());
    for (std::size_t r = 0; r < idx.size(); ++r) out[r] = labels[static_cast<std::size_t>(idx[r])];
    return out;
}

Dataset Dataset::head(std::int64_t n) const {
    n = std::min(n, size());
    std::vector<std::int64_t> idx(static_cast<std::size_t>(n));
    for (std::int64_t i = 0; i < n; ++i) idx[static_cast<std::size_t>(i)] = i;
    Dataset out;
    out.images = gather(idx);
    out.labels = gather_labels(idx);
    out.classes = classes;
    return out;
}

SyntheticKind synthetic_kind_from_name(const std::string& name) {
    if (name == "stripes") return SyntheticKind::stripes;
    if (name == "blobs") return SyntheticKind::blobs;
    if (name == "xor-patch") return SyntheticKind::xor_patch;
    throw ContractError("unknown synthetic dataset kind '" + name + "'");
}

namespace {

double clamp01(double v) { return std::clamp(v, 0.0, 1.0); }

void paint_stripes(std::span<double> img, int s, int cls, rng::Stream& st) {
    // orientation/phase codebook: horizontal, vertical, diagonal and
    // anti-diagonal stripes of period 2, each in two phases
    const int orient = cls % 4;
    const int phase = (cls / 4) % 2;
    const double fg = st.next_uniform(0.82, 0.95);
    const double bg = st.next_uniform(0.08, 0.18);
    for (int r = 0; r < s; ++r)
        for (int c = 0; c < s; ++c) {
            int sel = 0;
            switch (orient) {
                case 0: sel = r % 2; break;
                case 1: sel = c % 2; break;
                case 2: sel = (r + c) % 2; break;
                default: sel = (r - c + s) % 2; break;
            }
            const bool bright = sel == phase;
            const double jitter = st.next_uniform(-0.04, 0.04);
            img[static_cast<std::size_t>(r * s + c)] = clamp01((bright ? fg : bg) + jitter);
        }
}

void paint_blob(std::span<double> img, int s, int cls, int classes, rng::Stream& st) {
    // a faint class blob over a mid-gray noisy background; the low contrast
    // keeps decision margins near the usual pixel-budget attack scales
    const double cx0 = (s - 1) / 2.0, cy0 = (s - 1) / 2.0;
    const double ring = s * 0.28;
    const double angle = 2.0 * 3.14159265358979323846 * cls / classes;
    const double jx = st.next_uniform(-1.0, 1.0);
    const double jy = st.next_uniform(-1.0, 1.0);
    const double cx = cx0 + ring * std::cos(angle) + jx;
    const double cy = cy0 + ring * std::sin(angle) + jy;
    const double amp = st.next_uniform(0.16, 0.22);
    const double sigma = s / 4.5;
    const double base = st.next_uniform(0.35, 0.45);
    for (int r = 0; r < s; ++r)
        for (int c = 0; c < s; ++c) {
            const double d2 = (r - cy) * (r - cy) + (c - cx) * (c - cx);
            const double noise = st.next_uniform(-0.05, 0.05);
            img[static_cast<std::size_t>(r * s + c)] =
                clamp01(base + noise + amp * std::exp(-d2 / (2.0 * sigma * sigma)));
        }
}

int paint_xor(std::span<double> img, int s, int pattern, rng::Stream& st) {
    const bool left_bright = (pattern & 1) != 0;
    const bool right_bright = (pattern & 2) != 0;
    auto level = [&st](bool bright) {
        return bright ? st.next_uniform(0.78, 0.92) : st.next_uniform(0.08, 0.22);
    };
    const double bl = level(left_bright);
    const double br = level(right_bright);
    for (int r = 0; r < s; ++r)
        for (int c = 0; c < s; ++c) {
            const double base = c < s / 2 ? bl : br;
            img[static_cast<std::size_t>(r * s + c)] = clamp01(base + st.next_uniform(-0.03, 0.03));
        }
    return left_bright != right_bright ? 1 : 0;
}

}  // namespace

Dataset generate_synthetic(SyntheticKind kind, int n, int image_size, int classes,
                           std::uint64_t seed) {
    if (image_size < 4) throw ContractError("image_size must be >= 4");
    if (classes < 2) throw ContractError("need at least 2 classes");
    if (n < classes) throw ContractError("need at least one sample per class");
    if (kind == SyntheticKind::stripes && classes > 8)
        throw ContractError("stripes supports at most 8 classes");
    if (kind == SyntheticKind::xor_patch && classes != 2)
        throw ContractError("xor-patch is a 2-class problem");

    const int s = image_size;
    const std::int64_t d = static_cast<std::int64_t>(s) * s;
    Dataset ds;
    ds.classes = classes;
    ds.images = Tensor({n, 1, s, s});
    ds.labels.resize(static_cast<std::size_t>(n));
    auto data = ds.images.data();

    for (int i = 0; i < n; ++i) {
        rng::Stream st(rng::derive_key(seed, 0xda7a5e7, static_cast<std::uint64_t>(i)));
        auto img = data.subspan(static_cast<std::size_t>(i * d), static_cast<std::size_t>(d));
        switch (kind) {
            case SyntheticKind::stripes:
                ds.labels[static_cast<std::size_t>(i)] = i % classes;
                paint_stripes(img, s, i % classes, st);
                break;
            case SyntheticKind::blobs:
                ds.labels[static_cast<std::size_t>(i)] = i % classes;
                paint_blob(img, s, i % classes, classes, st);
                break;
            case SyntheticKind::xor_patch:
                ds.labels[static_cast<std::size_t>(i)] = paint_xor(img, s, i % 4, st);
                break;
        }
    }

    // deterministic order shuffle so minibatches mix classes
    rng::Stream st(rng::derive_key(seed, 0x0d5));
    std::vector<std::int64_t> perm(static_cast<std::size_t>(n));
    for (int i = 0; i < n; ++i) perm[static_cast<std::size_t>(i)] = i;
    for (int i = n - 1; i > 0; --i) {
        const auto j = static_cast<std::int64_t>(st.next_u64() % static_cast<std::uint64_t>(i + 1));
        std::swap(perm[static_cast<std::size_t>(i)], perm[static_cast<std::size_t>(j)]);
    }
    Dataset out;
    out.classes = classes;
    out.images = ds.gather(perm);
    out.labels = ds.gather_labels(perm);
    return out;
}

void save_dataset(const Dataset& ds, const std::string& images_path,
                  const std::string& labels_path) {
    std::string img;
    img += "TDS1";
    fsio::put_u8(img, 1);  // dtype: f64 little-endian
    fsio::put_u8(img, static_cast<std::uint8_t>(ds.images.rank()));
    for (auto dim : ds.images.shape()) fsio::put_u32(img, static_cast<std::uint32_t>(dim));
    for (double v : ds.images.data()) fsio::put_f64(img, v);
    fsio::write_file_atomic(images_path, img);

    std::string lab;
    lab += "TLB1";
    fsio::put_u32(lab, static_cast<std::uint32_t>(ds.labels.size()));
    fsio::put_u32(lab, static_cast<std::uint32_t>(ds.classes));
    for (int v : ds.labels) fsio::put_u32(lab, static_cast<std::uint32_t>(v));
    fsio::write_file_atomic(labels_path, lab);
}

Dataset load_dataset(const std::string& images_path, const std::string& labels_path) {
    const std::string img = fsio::read_file(images_path);
    fsio::Reader r{img};
    r.expect_magic("TDS1", images_path);
    const std::uint8_t dtype = r.u8();
    if (dtype != 1) throw IoError(images_path + ": unsupported dtype code " + std::to_string(dtype));
    const std::uint8_t rank = r.u8();
    Shape shape;
    for (int i = 0; i < rank; ++i) shape.push_back(static_cast<std::int64_t>(r.u32()));
    const std::int64_t n_values = shape_numel(shape);
    if (img.size() != r.pos + static_cast<std::size_t>(n_values) * 8)
        throw IoError(images_path + ": payload length does not match header");
    Dataset ds;
    ds.images = Tensor(shape);
    for (auto& v : ds.images.data()) v = r.f64();

    const std::string lab = fsio::read_file(labels_path);
    fsio::Reader lr{lab};
    lr.expect_magic("TLB1", labels_path);
    const std::uint32_t n = lr.u32();
    const std::uint32_t k = lr.u32();
    if (static_cast<std::int64_t>(n) != ds.images.dim(0))
        throw IoError(labels_path + ": label count does not match image count");
    ds.classes = static_cast<int>(k);
    ds.labels.resize(n);
    for (std::uint32_t i = 0; i < n; ++i) {
        const std::uint32_t v = lr.u32();
        if (v >= k) throw IoError(labels_path + ": label " + std::to_string(v) + " out of range");
        ds.labels[i] = static_cast<int>(v);
    }
    if (!lr.done()) throw IoError(labels_path + ": trailing bytes after payload");
    return ds;
}

}  // namespace snnlab

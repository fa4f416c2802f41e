#pragma once

#include "attnx/tensor.hpp"

#include <nlohmann/json.hpp>

#include <cstdio>
#include <cstring>
#include <filesystem>
#include <fstream>
#include <png.h>
#include <zlib.h>

namespace attnx {

namespace fs = std::filesystem;
using json = nlohmann::json;

// ---------------------------------------------------------------------------
// PNG image I/O. Images live in [-1,1] (3-channel), attention maps in [0,1]
// (grayscale). 8-bit mapping: pix = round((x+1) * 127.5).
// ---------------------------------------------------------------------------

inline void save_image(const fs::path& path, const tensor<float>& img) {
    if (img.rank() != 4 || img.dim(0) != 1 || img.dim(1) != 3)
        throw std::invalid_argument("save_image expects [1,3,H,W], got " + shape_str(img.shape()));
    const int H = img.dim(2), W = img.dim(3);
    for (float v : img.data())
        if (v < -1.0001f || v > 1.0001f)
            throw std::invalid_argument("save_image: value " + std::to_string(v) +
                                        " outside [-1,1]");
    std::vector<unsigned char> buf(static_cast<std::size_t>(H) * W * 3);
    for (int i = 0; i < H; ++i)
        for (int j = 0; j < W; ++j)
            for (int c = 0; c < 3; ++c) {
                const float v = img.at(0, c, i, j);
                const int p = static_cast<int>(std::lround((v + 1.0f) * 127.5f));
                buf[(static_cast<std::size_t>(i) * W + j) * 3 + c] =
                    static_cast<unsigned char>(std::clamp(p, 0, 255));
            }
    png_image pi{};
    pi.version = PNG_IMAGE_VERSION;
    pi.width = static_cast<png_uint_32>(W);
    pi.height = static_cast<png_uint_32>(H);
    pi.format = PNG_FORMAT_RGB;
    if (!png_image_write_to_file(&pi, path.string().c_str(), 0, buf.data(), 0, nullptr))
        throw std::runtime_error("failed to write PNG " + path.string() + ": " + pi.message);
}

inline void save_attention_map(const fs::path& path, const tensor<float>& map) {
    if (map.rank() != 4 || map.dim(0) != 1 || map.dim(1) != 1)
        throw std::invalid_argument("save_attention_map expects [1,1,H,W]");
    const int H = map.dim(2), W = map.dim(3);
    for (float v : map.data())
        if (v < -0.0001f || v > 1.0001f)
            throw std::invalid_argument("save_attention_map: value outside [0,1]");
    std::vector<unsigned char> buf(static_cast<std::size_t>(H) * W);
    for (std::size_t i = 0; i < buf.size(); ++i)
        buf[i] = static_cast<unsigned char>(
            std::clamp(static_cast<int>(std::lround(map.data()[i] * 255.0f)), 0, 255));
    png_image pi{};
    pi.version = PNG_IMAGE_VERSION;
    pi.width = static_cast<png_uint_32>(W);
    pi.height = static_cast<png_uint_32>(H);
    pi.format = PNG_FORMAT_GRAY;
    if (!png_image_write_to_file(&pi, path.string().c_str(), 0, buf.data(), 0, nullptr))
        throw std::runtime_error("failed to write PNG " + path.string() + ": " + pi.message);
}

// Decodes to a [1,3,H,W] tensor in [-1,1]; grayscale inputs replicate to RGB.
inline tensor<float> load_image(const fs::path& path) {
    png_image pi{};
    pi.version = PNG_IMAGE_VERSION;
    if (!png_image_begin_read_from_file(&pi, path.string().c_str()))
        throw std::runtime_error("failed to read PNG " + path.string() + ": " + pi.message);
    pi.format = PNG_FORMAT_RGB;
    std::vector<unsigned char> buf(PNG_IMAGE_SIZE(pi));
    if (!png_image_finish_read(&pi, nullptr, buf.data(), 0, nullptr))
        throw std::runtime_error("failed to decode PNG " + path.string() + ": " + pi.message);
    const int H = static_cast<int>(pi.height), W = static_cast<int>(pi.width);
    tensor<float> img(shape_t{1, 3, H, W});
    for (int i = 0; i < H; ++i)
        for (int j = 0; j < W; ++j)
            for (int c = 0; c < 3; ++c)
                img.at(0, c, i, j) =
                    buf[(static_cast<std::size_t>(i) * W + j) * 3 + c] / 127.5f - 1.0f;
    return img;
}

// Binary {0,1} mask from a grayscale PNG, [1,1,H,W].
inline tensor<float> load_mask(const fs::path& path) {
    png_image pi{};
    pi.version = PNG_IMAGE_VERSION;
    if (!png_image_begin_read_from_file(&pi, path.string().c_str()))
        throw std::runtime_error("failed to read PNG " + path.string() + ": " + pi.message);
    pi.format = PNG_FORMAT_GRAY;
    std::vector<unsigned char> buf(PNG_IMAGE_SIZE(pi));
    if (!png_image_finish_read(&pi, nullptr, buf.data(), 0, nullptr))
        throw std::runtime_error("failed to decode PNG " + path.string() + ": " + pi.message);
    const int H = static_cast<int>(pi.height), W = static_cast<int>(pi.width);
    tensor<float> m(shape_t{1, 1, H, W});
    for (std::size_t i = 0; i < m.numel(); ++i) m.data()[i] = buf[i] > 127 ? 1.0f : 0.0f;
    return m;
}

// ---------------------------------------------------------------------------
// Datasets. Layout: trainA/ trainB/ testA/ testB/ with optional maskA/ maskB/
// holding masks matched to image filenames.
// ---------------------------------------------------------------------------

struct dataset {
    std::vector<tensor<float>> images;
    std::vector<tensor<float>> masks;  // empty, or parallel to images
    std::string domain;

    std::size_t size() const { return images.size(); }
    bool has_masks() const { return !masks.empty(); }
};

inline dataset load_dataset_dir(const fs::path& dir, const fs::path& mask_dir = {},
                                const std::string& domain = "") {
    if (!fs::is_directory(dir)) throw std::runtime_error("no such dataset directory: " + dir.string());
    std::vector<fs::path> files;
    for (const auto& e : fs::directory_iterator(dir))
        if (e.is_regular_file() && e.path().extension() == ".png") files.push_back(e.path());
    std::sort(files.begin(), files.end());
    if (files.empty()) throw std::runtime_error("dataset directory is empty: " + dir.string());

    dataset ds;
    ds.domain = domain;
    shape_t expect;
    for (const auto& f : files) {
        ds.images.push_back(load_image(f));
        if (expect.empty()) expect = ds.images.back().shape();
        else if (ds.images.back().shape() != expect)
            throw std::runtime_error("inconsistent image dimensions at " + f.string());
        if (!mask_dir.empty()) {
            const fs::path mp = mask_dir / f.filename();
            if (fs::exists(mp)) ds.masks.push_back(load_mask(mp));
        }
    }
    if (!ds.masks.empty() && ds.masks.size() != ds.images.size())
        throw std::runtime_error("partial mask coverage in " + mask_dir.string());
    return ds;
}

struct dataset_bundle {
    dataset train_s, train_t, test_s, test_t;
};

inline dataset_bundle load_dataset(const fs::path& root) {
    dataset_bundle b;
    const fs::path mask_a = fs::is_directory(root / "maskA") ? root / "maskA" : fs::path{};
    const fs::path mask_b = fs::is_directory(root / "maskB") ? root / "maskB" : fs::path{};
    b.train_s = load_dataset_dir(root / "trainA", mask_a, "S");
    b.train_t = load_dataset_dir(root / "trainB", mask_b, "T");
    b.test_s = load_dataset_dir(root / "testA", mask_a, "S");
    b.test_t = load_dataset_dir(root / "testB", mask_b, "T");
    return b;
}

// ---------------------------------------------------------------------------
// Synthetic two-domain data. Backgrounds come from one shared distribution;
// only the foreground object distinguishes the domains (solid fill in S,
// stripes in T).
// ---------------------------------------------------------------------------

struct synthetic_spec {
    std::uint64_t seed = 0;
    int count = 200;
    int test_count = 40;
    int image_size = 64;
    double empty_fraction = 0.1;
    int radius_min = 8;
    int radius_max = 20;
    int stripe_period = 3;
    double noise_std = 0.05;

    void validate() const {
        if (count < 1 || test_count < 1) throw std::invalid_argument("synthetic count must be >= 1");
        if (image_size % 4 != 0 || image_size < 8)
            throw std::invalid_argument("image_size must be a multiple of 4 and >= 8");
        if (empty_fraction < 0 || empty_fraction > 1)
            throw std::invalid_argument("empty_fraction outside [0,1]");
        if (radius_min < 1 || radius_max < radius_min || 2 * radius_max >= image_size)
            throw std::invalid_argument("invalid disc radius range");
        if (stripe_period < 1) throw std::invalid_argument("stripe_period must be >= 1");
    }
};

inline void to_json(json& j, const synthetic_spec& s) {
    j = json{{"seed", s.seed},         {"count", s.count},
             {"test_count", s.test_count}, {"image_size", s.image_size},
             {"empty_fraction", s.empty_fraction}, {"radius_min", s.radius_min},
             {"radius_max", s.radius_max}, {"stripe_period", s.stripe_period},
             {"noise_std", s.noise_std}};
}

inline void from_json(const json& j, synthetic_spec& s) {
    s = synthetic_spec{};
    if (j.contains("seed")) j.at("seed").get_to(s.seed);
    if (j.contains("count")) j.at("count").get_to(s.count);
    if (j.contains("test_count")) j.at("test_count").get_to(s.test_count);
    if (j.contains("image_size")) j.at("image_size").get_to(s.image_size);
    if (j.contains("empty_fraction")) j.at("empty_fraction").get_to(s.empty_fraction);
    if (j.contains("radius_min")) j.at("radius_min").get_to(s.radius_min);
    if (j.contains("radius_max")) j.at("radius_max").get_to(s.radius_max);
    if (j.contains("stripe_period")) j.at("stripe_period").get_to(s.stripe_period);
    if (j.contains("noise_std")) j.at("noise_std").get_to(s.noise_std);
}

namespace detail {

inline void fill_background(tensor<float>& img, rng& r, double noise_std) {
    const int H = img.dim(2), W = img.dim(3);
    float c0[3], c1[3];
    for (int c = 0; c < 3; ++c) {
        c0[c] = static_cast<float>(r.uniform(-0.9, 0.3));
        c1[c] = static_cast<float>(r.uniform(-0.9, 0.3));
    }
    const bool horizontal = r.uniform() < 0.5;
    for (int i = 0; i < H; ++i)
        for (int j = 0; j < W; ++j) {
            const float t = horizontal ? static_cast<float>(j) / (W - 1)
                                       : static_cast<float>(i) / (H - 1);
            for (int c = 0; c < 3; ++c) {
                float v = c0[c] + t * (c1[c] - c0[c]) +
                          static_cast<float>(r.normal() * noise_std);
                img.at(0, c, i, j) = std::clamp(v, -1.0f, 1.0f);
            }
        }
}

// One image with up to one disc; returns the rasterized binary mask.
inline std::pair<tensor<float>, tensor<float>> synth_image(const synthetic_spec& sp, rng& r,
                                                           bool striped) {
    const int S = sp.image_size;
    tensor<float> img(shape_t{1, 3, S, S});
    tensor<float> mask(shape_t{1, 1, S, S}, 0.0f);
    fill_background(img, r, sp.noise_std);

    const bool empty = r.uniform() < sp.empty_fraction;
    // always consume the foreground draws to keep the stream aligned
    const int radius = r.uniform_int(sp.radius_min, sp.radius_max);
    const int cx = r.uniform_int(radius, S - 1 - radius);
    const int cy = r.uniform_int(radius, S - 1 - radius);
    float fg0[3], fg1[3];
    for (int c = 0; c < 3; ++c) {
        fg0[c] = static_cast<float>(r.uniform(0.2, 1.0));
        fg1[c] = static_cast<float>(r.uniform(-1.0, -0.2));
    }
    if (empty) return {img, mask};

    for (int i = 0; i < S; ++i)
        for (int j = 0; j < S; ++j) {
            const int di = i - cy, dj = j - cx;
            if (di * di + dj * dj > radius * radius) continue;
            mask.at(0, 0, i, j) = 1.0f;
            const bool band = ((j / sp.stripe_period) % 2) == 0;
            for (int c = 0; c < 3; ++c)
                img.at(0, c, i, j) = striped ? (band ? fg0[c] : fg1[c]) : fg0[c];
        }
    return {img, mask};
}

}  // namespace detail

struct synthetic_bundle {
    dataset train_s, train_t, test_s, test_t;
};

inline synthetic_bundle generate_synthetic(const synthetic_spec& sp) {
    sp.validate();
    rng r(sp.seed);
    synthetic_bundle out;
    auto fill = [&](dataset& ds, int count, bool striped, const char* domain) {
        ds.domain = domain;
        for (int i = 0; i < count; ++i) {
            auto [img, mask] = detail::synth_image(sp, r, striped);
            ds.images.push_back(std::move(img));
            ds.masks.push_back(std::move(mask));
        }
    };
    fill(out.train_s, sp.count, false, "S");
    fill(out.train_t, sp.count, true, "T");
    fill(out.test_s, sp.test_count, false, "S");
    fill(out.test_t, sp.test_count, true, "T");
    return out;
}

inline void write_dataset(const fs::path& root, const synthetic_bundle& b) {
    auto dump = [&](const dataset& ds, const fs::path& img_dir, const fs::path& mask_dir,
                    const char* prefix) {
        fs::create_directories(img_dir);
        fs::create_directories(mask_dir);
        char name[64];
        for (std::size_t i = 0; i < ds.images.size(); ++i) {
            std::snprintf(name, sizeof(name), "%s_%05zu.png", prefix, i);
            save_image(img_dir / name, ds.images[i]);
            save_attention_map(mask_dir / name, ds.masks[i]);
        }
    };
    dump(b.train_s, root / "trainA", root / "maskA", "train");
    dump(b.train_t, root / "trainB", root / "maskB", "train");
    dump(b.test_s, root / "testA", root / "maskA", "test");
    dump(b.test_t, root / "testB", root / "maskB", "test");
}

// ---------------------------------------------------------------------------
// Checkpoints: magic header, version, JSON metadata block, length-prefixed
// named float32 arrays, trailing CRC32. Little-endian throughout. Writes go
// through a temp file plus atomic rename.
// ---------------------------------------------------------------------------

struct named_array {
    std::string name;
    shape_t shape;
    std::vector<float> values;
};

struct checkpoint {
    json meta;
    std::vector<named_array> arrays;

    const named_array& find(const std::string& name) const {
        for (const auto& a : arrays)
            if (a.name == name) return a;
        throw std::runtime_error("checkpoint is missing array " + name);
    }
};

namespace detail {

constexpr char ckpt_magic[8] = {'A', 'T', 'T', 'N', 'X', 'C', 'K', 'P'};
constexpr std::uint32_t ckpt_version = 1;

struct byte_sink {
    std::vector<unsigned char> bytes;
    void put(const void* p, std::size_t n) {
        const auto* b = static_cast<const unsigned char*>(p);
        bytes.insert(bytes.end(), b, b + n);
    }
    template <class V>
    void put_le(V v) {
        unsigned char b[sizeof(V)];
        for (std::size_t i = 0; i < sizeof(V); ++i)
            b[i] = static_cast<unsigned char>((static_cast<std::uint64_t>(v) >> (8 * i)) & 0xff);
        put(b, sizeof(V));
    }
};

struct byte_source {
    const unsigned char* p;
    std::size_t n, pos = 0;
    void get(void* out, std::size_t k) {
        if (pos + k > n) throw std::runtime_error("truncated checkpoint");
        std::memcpy(out, p + pos, k);
        pos += k;
    }
    template <class V>
    V get_le() {
        unsigned char b[sizeof(V)];
        get(b, sizeof(V));
        std::uint64_t v = 0;
        for (std::size_t i = 0; i < sizeof(V); ++i)
            v |= static_cast<std::uint64_t>(b[i]) << (8 * i);
        return static_cast<V>(v);
    }
};

}  // namespace detail

inline void save_checkpoint(const fs::path& path, const checkpoint& ck) {
    detail::byte_sink out;
    out.put(detail::ckpt_magic, sizeof(detail::ckpt_magic));
    out.put_le<std::uint32_t>(detail::ckpt_version);
    const std::string meta = ck.meta.dump();
    out.put_le<std::uint64_t>(meta.size());
    out.put(meta.data(), meta.size());
    out.put_le<std::uint32_t>(static_cast<std::uint32_t>(ck.arrays.size()));
    for (const auto& a : ck.arrays) {
        out.put_le<std::uint32_t>(static_cast<std::uint32_t>(a.name.size()));
        out.put(a.name.data(), a.name.size());
        out.put_le<std::uint32_t>(static_cast<std::uint32_t>(a.shape.size()));
        for (int d : a.shape) out.put_le<std::uint32_t>(static_cast<std::uint32_t>(d));
        out.put_le<std::uint64_t>(a.values.size());
        for (float v : a.values) {
            std::uint32_t bits;
            std::memcpy(&bits, &v, 4);
            out.put_le<std::uint32_t>(bits);
        }
    }
    const auto crc = static_cast<std::uint32_t>(
        ::crc32(0L, out.bytes.data(), static_cast<uInt>(out.bytes.size())));
    out.put_le<std::uint32_t>(crc);

    const fs::path tmp = path.string() + ".tmp";
    {
        std::ofstream f(tmp, std::ios::binary | std::ios::trunc);
        if (!f) throw std::runtime_error("cannot open " + tmp.string());
        f.write(reinterpret_cast<const char*>(out.bytes.data()),
                static_cast<std::streamsize>(out.bytes.size()));
        if (!f) throw std::runtime_error("short write to " + tmp.string());
    }
    fs::rename(tmp, path);
}

inline checkpoint load_checkpoint(const fs::path& path) {
    std::ifstream f(path, std::ios::binary);
    if (!f) throw std::runtime_error("cannot open checkpoint " + path.string());
    std::vector<unsigned char> bytes((std::istreambuf_iterator<char>(f)),
                                     std::istreambuf_iterator<char>());
    if (bytes.size() < sizeof(detail::ckpt_magic) + 8)
        throw std::runtime_error("checkpoint too small: " + path.string());
    const auto crc_stored = static_cast<std::uint32_t>(
        bytes[bytes.size() - 4] | (bytes[bytes.size() - 3] << 8) |
        (bytes[bytes.size() - 2] << 16) |
        (static_cast<std::uint32_t>(bytes[bytes.size() - 1]) << 24));
    const auto crc_actual = static_cast<std::uint32_t>(
        ::crc32(0L, bytes.data(), static_cast<uInt>(bytes.size() - 4)));
    if (crc_stored != crc_actual)
        throw std::runtime_error("checkpoint checksum mismatch: " + path.string());

    detail::byte_source in{bytes.data(), bytes.size() - 4};
    char magic[8];
    in.get(magic, 8);
    if (std::memcmp(magic, detail::ckpt_magic, 8) != 0)
        throw std::runtime_error("not a checkpoint file: " + path.string());
    const auto version = in.get_le<std::uint32_t>();
    if (version != detail::ckpt_version)
        throw std::runtime_error("unsupported checkpoint version " + std::to_string(version));

    checkpoint ck;
    const auto meta_len = in.get_le<std::uint64_t>();
    std::string meta(meta_len, '\0');
    in.get(meta.data(), meta_len);
    ck.meta = json::parse(meta);
    const auto count = in.get_le<std::uint32_t>();
    for (std::uint32_t i = 0; i < count; ++i) {
        named_array a;
        const auto name_len = in.get_le<std::uint32_t>();
        a.name.resize(name_len);
        in.get(a.name.data(), name_len);
        const auto rank = in.get_le<std::uint32_t>();
        for (std::uint32_t d = 0; d < rank; ++d)
            a.shape.push_back(static_cast<int>(in.get_le<std::uint32_t>()));
        const auto n = in.get_le<std::uint64_t>();
        a.values.resize(n);
        for (std::uint64_t j = 0; j < n; ++j) {
            const auto bits = in.get_le<std::uint32_t>();
            std::memcpy(&a.values[j], &bits, 4);
        }
        ck.arrays.push_back(std::move(a));
    }
    return ck;
}

}  // namespace attnx

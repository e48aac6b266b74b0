#include "creagen/synth.hpp"

#include <algorithm>
#include <cmath>
#include <fstream>
#include <numbers>
#include <random>
#include <sstream>
#include <stdexcept>
#include <thread>

#include "creagen/image_io.hpp"
#include "json.hpp"
#include "creagen/seed.hpp"

namespace creagen {

const std::array<std::string_view, kNumShapes> kShapeNames = {
    "a_line", "rectangle", "tapered", "cropped", "hourglass", "t_shape", "shifted_panel"};
const std::array<std::string_view, kNumTextures> kTextureNames = {
    "uniform", "tiled", "striped", "animal_skin", "dotted", "print", "graphical"};

bool LabeledItem::is_background(std::size_t y, std::size_t x) const {
    const auto* p = &rgb[(y * size + x) * 3];
    return p[0] == 255 && p[1] == 255 && p[2] == 255;
}

std::size_t LabeledItem::mask_area() const {
    return static_cast<std::size_t>(std::count(mask.begin(), mask.end(), std::uint8_t{1}));
}

namespace {

using Color = std::array<std::uint8_t, 3>;

double luma(const Color& c) { return 0.299 * c[0] + 0.587 * c[1] + 0.114 * c[2]; }

// Channels capped below 255 so no garment pixel can equal the white background.
Color random_color(std::mt19937_64& rng) {
    std::uniform_int_distribution<int> d(16, 224);
    return {static_cast<std::uint8_t>(d(rng)), static_cast<std::uint8_t>(d(rng)), static_cast<std::uint8_t>(d(rng))};
}

Color contrasting_color(std::mt19937_64& rng, const Color& base) {
    for (;;) {
        Color c = random_color(rng);
        if (std::fabs(luma(c) - luma(base)) >= 70.0) return c;
    }
}

struct Silhouette {
    double top, bottom, center, width_scale;
    int family;

    // Half-width and centre (in canvas fractions) at relative height t in [0, 1].
    std::pair<double, double> profile(double t) const {
        double hw = 0.2, c = center;
        switch (family) {
            case 0: hw = 0.12 + 0.22 * t; break;
            case 1: hw = 0.22; break;
            case 2: hw = 0.34 - 0.22 * t; break;
            case 3: hw = 0.34; break;
            case 4: hw = 0.30 - 0.18 * std::sin(std::numbers::pi * t); break;
            case 5: hw = t < 0.3 ? 0.38 : 0.17; break;
            case 6:
                hw = 0.15;
                c = center + (t < 0.5 ? -0.12 : 0.12);
                break;
        }
        return {hw * width_scale, c};
    }
};

Silhouette make_silhouette(int family, std::mt19937_64& rng) {
    std::uniform_real_distribution<double> u(-1.0, 1.0);
    Silhouette s{};
    s.family = family;
    if (family == 3) {
        s.top = 0.30 + 0.03 * u(rng);
        s.bottom = 0.64 + 0.03 * u(rng);
    } else {
        s.top = 0.12 + 0.03 * u(rng);
        s.bottom = 0.88 + 0.03 * u(rng);
    }
    s.center = 0.5 + 0.03 * u(rng);
    s.width_scale = 1.0 + 0.1 * u(rng);
    return s;
}

class TextureProgram {
   public:
    TextureProgram(int kind, std::size_t size, std::mt19937_64& rng) : kind_(kind), size_(size) {
        unit_ = static_cast<double>(size) / 32.0;
        c1_ = random_color(rng);
        c2_ = contrasting_color(rng, c1_);
        std::uniform_int_distribution<int> off(0, 63);
        ox_ = off(rng);
        oy_ = off(rng);
        switch (kind) {
            case 1: period_ = static_cast<int>(std::lround((4 + static_cast<int>(rng() % 2)) * unit_)); break;
            case 2: period_ = static_cast<int>(std::lround((4 + 2 * static_cast<int>(rng() % 2)) * unit_)); break;
            case 3: {
                cell_ = 6.0 * unit_;
                grid_ = static_cast<std::size_t>(std::ceil(size / cell_)) + 2;
                std::uniform_real_distribution<double> v(0.0, 1.0);
                noise_.resize(grid_ * grid_);
                for (auto& x : noise_) x = v(rng);
                break;
            }
            case 4: period_ = static_cast<int>(std::lround(6 * unit_)); break;
            case 5: {
                palette_ = {c1_, c2_, random_color(rng), random_color(rng)};
                speckle_.resize(size * size);
                for (auto& s : speckle_) s = static_cast<std::uint8_t>(rng() % 4);
                break;
            }
            case 6: motif_ = static_cast<int>(rng() % 3); break;
            default: break;
        }
    }

    Color at(std::size_t y, std::size_t x, double cy, double cx) const {
        const int iy = static_cast<int>(y) + oy_, ix = static_cast<int>(x) + ox_;
        switch (kind_) {
            case 0: return c1_;
            case 1: return ((iy / period_ + ix / period_) % 2) ? c2_ : c1_;
            case 2: return (iy % period_) < period_ / 2 ? c2_ : c1_;
            case 3: return value_noise(y, x) > 0.62 ? c2_ : c1_;
            case 4: {
                double py = (iy % period_) + 0.5 - period_ / 2.0, px = (ix % period_) + 0.5 - period_ / 2.0;
                return std::hypot(py, px) <= 1.3 * unit_ ? c2_ : c1_;
            }
            case 5: {
                std::size_t by = static_cast<std::size_t>(y / std::max(1.0, unit_));
                std::size_t bx = static_cast<std::size_t>(x / std::max(1.0, unit_));
                return palette_[speckle_[(by * size_ + bx) % speckle_.size()]];
            }
            case 6: {
                double dy = (static_cast<double>(y) + 0.5) / size_ - cy, dx = (static_cast<double>(x) + 0.5) / size_ - cx;
                bool in = false;
                if (motif_ == 0) in = std::fabs(dx) + std::fabs(dy) <= 0.16;
                if (motif_ == 1) {
                    double r = std::hypot(dx, dy);
                    in = r >= 0.08 && r <= 0.16;
                }
                if (motif_ == 2) in = (std::fabs(dx - dy) <= 0.05 || std::fabs(dx + dy) <= 0.05) && std::fabs(dx) <= 0.16;
                return in ? c2_ : c1_;
            }
        }
        return c1_;
    }

   private:
    double value_noise(std::size_t y, std::size_t x) const {
        double fy = (static_cast<double>(y) + oy_ % 7) / cell_, fx = (static_cast<double>(x) + ox_ % 7) / cell_;
        auto gy = static_cast<std::size_t>(fy), gx = static_cast<std::size_t>(fx);
        double ty = fy - gy, tx = fx - gx;
        auto g = [&](std::size_t a, std::size_t b) { return noise_[std::min(a, grid_ - 1) * grid_ + std::min(b, grid_ - 1)]; };
        double top = g(gy, gx) * (1 - tx) + g(gy, gx + 1) * tx;
        double bot = g(gy + 1, gx) * (1 - tx) + g(gy + 1, gx + 1) * tx;
        return top * (1 - ty) + bot * ty;
    }

    int kind_;
    std::size_t size_;
    double unit_ = 1.0;
    Color c1_{}, c2_{};
    int ox_ = 0, oy_ = 0, period_ = 4, motif_ = 0;
    double cell_ = 6.0;
    std::size_t grid_ = 0;
    std::vector<double> noise_;
    std::vector<Color> palette_;
    std::vector<std::uint8_t> speckle_;
};

}  // namespace

LabeledItem render_item(int shape_class, int texture_class, std::uint64_t style_seed, std::size_t size) {
    if (shape_class < 0 || shape_class >= kNumShapes) {
        throw std::invalid_argument("render_item: shape class " + std::to_string(shape_class) + " out of range");
    }
    if (texture_class < 0 || texture_class >= kNumTextures) {
        throw std::invalid_argument("render_item: texture class " + std::to_string(texture_class) + " out of range");
    }
    if (size != 32 && size != 64) throw std::invalid_argument("render_item: size must be 32 or 64");
    std::mt19937_64 rng(derive_seed(style_seed, {static_cast<std::uint64_t>(shape_class),
                                                 static_cast<std::uint64_t>(texture_class)}));
    Silhouette sil = make_silhouette(shape_class, rng);
    TextureProgram tex(texture_class, size, rng);

    LabeledItem item;
    item.size = size;
    item.shape_label = shape_class;
    item.texture_label = texture_class;
    item.rgb.assign(size * size * 3, 255);
    item.mask.assign(size * size, 0);
    const double cy = 0.5 * (sil.top + sil.bottom);
    for (std::size_t y = 0; y < size; ++y) {
        double v = (static_cast<double>(y) + 0.5) / size;
        if (v < sil.top || v > sil.bottom) continue;
        auto [hw, c] = sil.profile((v - sil.top) / (sil.bottom - sil.top));
        for (std::size_t x = 0; x < size; ++x) {
            double u = (static_cast<double>(x) + 0.5) / size;
            if (std::fabs(u - c) > hw) continue;
            item.mask[y * size + x] = 1;
            Color col = tex.at(y, x, cy, sil.center);
            std::copy(col.begin(), col.end(), item.rgb.begin() + static_cast<std::ptrdiff_t>((y * size + x) * 3));
        }
    }
    return item;
}

LabeledItem apply_jitter(const LabeledItem& item, const JitterParams& params, double* lost) {
    const std::size_t n = item.size;
    const double centre = n / 2.0;
    LabeledItem out = item;
    std::fill(out.rgb.begin(), out.rgb.end(), std::uint8_t{255});
    if (out.has_mask()) std::fill(out.mask.begin(), out.mask.end(), std::uint8_t{0});
    const double sx = params.shift_x * n, sy = params.shift_y * n;
    for (std::size_t y = 0; y < n; ++y) {
        double src_y = (static_cast<double>(y) + 0.5 - centre - sy) / params.scale + centre;
        auto iy = static_cast<long>(std::floor(src_y));
        if (iy < 0 || iy >= static_cast<long>(n)) continue;
        for (std::size_t x = 0; x < n; ++x) {
            double src_x = (static_cast<double>(x) + 0.5 - centre - sx) / params.scale + centre;
            auto ix = static_cast<long>(std::floor(src_x));
            if (ix < 0 || ix >= static_cast<long>(n)) continue;
            std::size_t s = static_cast<std::size_t>(iy) * n + static_cast<std::size_t>(ix);
            std::copy_n(item.rgb.begin() + static_cast<std::ptrdiff_t>(s * 3), 3,
                        out.rgb.begin() + static_cast<std::ptrdiff_t>((y * n + x) * 3));
            if (out.has_mask()) out.mask[y * n + x] = item.mask[s];
        }
    }
    if (lost) {
        std::size_t total = 0, gone = 0;
        for (std::size_t y = 0; y < n; ++y)
            for (std::size_t x = 0; x < n; ++x) {
                bool fg = item.has_mask() ? item.mask[y * n + x] != 0 : !item.is_background(y, x);
                if (!fg) continue;
                ++total;
                double fy = (static_cast<double>(y) + 0.5 - centre) * params.scale + centre + sy;
                double fx = (static_cast<double>(x) + 0.5 - centre) * params.scale + centre + sx;
                if (fy < 0 || fx < 0 || fy >= static_cast<double>(n) || fx >= static_cast<double>(n)) ++gone;
            }
        *lost = total ? static_cast<double>(gone) / static_cast<double>(total) : 0.0;
    }
    return out;
}

LabeledItem jitter(const LabeledItem& item, std::uint64_t seed) {
    std::mt19937_64 rng(seed);
    std::uniform_real_distribution<double> scale(0.9, 1.1), shift(-0.05, 0.05);
    constexpr int kMaxTries = 32;
    for (int attempt = 0; attempt < kMaxTries; ++attempt) {
        JitterParams p{scale(rng), shift(rng), shift(rng)};
        double lost = 0.0;
        LabeledItem out = apply_jitter(item, p, &lost);
        if (lost <= 0.05) return out;
    }
    throw std::runtime_error("jitter: no admissible transform after " + std::to_string(kMaxTries) + " draws");
}

std::string item_file_name(std::size_t id) {
    char buf[32];
    std::snprintf(buf, sizeof buf, "%06zu.png", id);
    return buf;
}

LabeledDataset generate_dataset(const SynthOptions& opt) {
    constexpr std::size_t kCells = kNumShapes * kNumTextures;
    if (opt.n_items < kCells) {
        throw std::invalid_argument("generate_dataset: need at least 49 items (one per class cell), got " +
                                    std::to_string(opt.n_items));
    }
    if (opt.augment_factor == 0) throw std::invalid_argument("generate_dataset: augment_factor must be >= 1");
    const std::size_t f = opt.augment_factor;
    LabeledDataset ds;
    ds.canvas = opt.size;
    ds.seed = opt.seed;
    ds.entries.resize(opt.n_items * f);

    auto build = [&](std::size_t base) {
        const std::size_t cell = base % kCells;
        const int shape = static_cast<int>(cell / kNumTextures), texture = static_cast<int>(cell % kNumTextures);
        const Split split = (base / kCells) % 10 == 9 ? Split::val : Split::train;
        LabeledItem original = render_item(shape, texture, derive_seed(opt.seed, {base}), opt.size);
        for (std::size_t c = 0; c < f; ++c) {
            auto& e = ds.entries[base * f + c];
            e.item = c == 0 ? original : jitter(original, derive_seed(opt.seed, {base, c}));
            e.split = split;
            e.base_id = base * f;
        }
    };
    const std::size_t workers = std::max<std::size_t>(1, std::min(opt.threads, opt.n_items));
    if (workers == 1) {
        for (std::size_t b = 0; b < opt.n_items; ++b) build(b);
    } else {
        std::vector<std::thread> pool;
        for (std::size_t w = 0; w < workers; ++w) {
            pool.emplace_back([&, w] {
                for (std::size_t b = w; b < opt.n_items; b += workers) build(b);
            });
        }
        for (auto& t : pool) t.join();
    }
    return ds;
}

namespace {

Image8 item_image(const LabeledItem& item) { return {item.size, item.size, 3, item.rgb}; }

Image8 mask_image(const LabeledItem& item) {
    Image8 m{item.size, item.size, 1, item.mask};
    for (auto& v : m.pixels) v = v ? 255 : 0;
    return m;
}

std::vector<std::string> split_csv_line(const std::string& line) {
    std::vector<std::string> out;
    std::stringstream ss(line);
    std::string cell;
    while (std::getline(ss, cell, ',')) out.push_back(cell);
    if (!line.empty() && line.back() == ',') out.emplace_back();
    return out;
}

}  // namespace

void save_dataset(const LabeledDataset& dataset, const std::filesystem::path& dir) {
    namespace fs = std::filesystem;
    fs::create_directories(dir / "images");
    if (dataset.masks_present) fs::create_directories(dir / "masks");
    std::ofstream index(dir / "index.csv", std::ios::binary);
    if (!index) throw std::runtime_error("save_dataset: cannot write " + (dir / "index.csv").string());
    index << "id,shape_label,texture_label,split,base_id\n";
    {
        nlohmann::ordered_json meta = {{"canvas", dataset.canvas}, {"seed", dataset.seed}, {"items", dataset.size()}};
        std::ofstream(dir / "dataset.json", std::ios::binary) << meta.dump(2) << '\n';
    }
    for (std::size_t id = 0; id < dataset.entries.size(); ++id) {
        const auto& e = dataset.entries[id];
        write_png(dir / "images" / item_file_name(id), item_image(e.item));
        if (dataset.masks_present) write_png(dir / "masks" / item_file_name(id), mask_image(e.item));
        index << id << ',' << e.item.shape_label << ',' << e.item.texture_label << ','
              << (e.split == Split::val ? "val" : "train") << ',' << e.base_id << '\n';
    }
}

LabeledDataset load_dataset(const std::filesystem::path& dir) {
    namespace fs = std::filesystem;
    const fs::path index_path = dir / "index.csv";
    std::ifstream index(index_path);
    if (!index) throw std::runtime_error("load_dataset: missing index file " + index_path.string());
    std::string line;
    if (!std::getline(index, line) || line != "id,shape_label,texture_label,split,base_id") {
        throw std::runtime_error("load_dataset: " + index_path.string() +
                                 " must start with header id,shape_label,texture_label,split,base_id");
    }
    LabeledDataset ds;
    bool any_mask = false, any_missing = false;
    std::size_t row = 1;
    while (std::getline(index, line)) {
        ++row;
        if (line.empty()) continue;
        auto cells = split_csv_line(line);
        auto fail = [&](const std::string& why) {
            throw std::runtime_error("load_dataset: " + index_path.string() + " row " + std::to_string(row) + ": " + why);
        };
        if (cells.size() != 5) fail("expected 5 columns");
        std::size_t id = 0, base = 0;
        int shape = 0, texture = 0;
        try {
            id = std::stoul(cells[0]);
            shape = std::stoi(cells[1]);
            texture = std::stoi(cells[2]);
            base = std::stoul(cells[4]);
        } catch (const std::exception&) {
            fail("malformed number");
        }
        if (id != ds.entries.size()) fail("ids must be consecutive from 0");
        if (shape < 0 || shape >= kNumShapes) fail("shape_label " + cells[1] + " out of range");
        if (texture < 0 || texture >= kNumTextures) fail("texture_label " + cells[2] + " out of range");
        if (cells[3] != "train" && cells[3] != "val") fail("split must be train or val");
        const fs::path img_path = dir / "images" / item_file_name(id);
        if (!fs::exists(img_path)) fail("image for id " + std::to_string(id) + " missing (" + img_path.string() + ")");
        Image8 img = read_png(img_path, 3);
        if (img.width != img.height) fail("image for id " + std::to_string(id) + " is not square");
        if (ds.canvas == 0) ds.canvas = img.width;
        if (img.width != ds.canvas) fail("image for id " + std::to_string(id) + " has a different size");
        DatasetEntry e;
        e.item.size = img.width;
        e.item.rgb = std::move(img.pixels);
        e.item.shape_label = shape;
        e.item.texture_label = texture;
        e.split = cells[3] == "val" ? Split::val : Split::train;
        e.base_id = base;
        const fs::path mask_path = dir / "masks" / item_file_name(id);
        if (fs::exists(mask_path)) {
            Image8 m = read_png(mask_path, 1);
            if (m.width != img.width || m.height != img.height) {
                fail("image/mask size mismatch for id " + std::to_string(id));
            }
            e.item.mask.resize(m.pixels.size());
            for (std::size_t i = 0; i < m.pixels.size(); ++i) e.item.mask[i] = m.pixels[i] >= 128 ? 1 : 0;
            any_mask = true;
        } else {
            any_missing = true;
        }
        ds.entries.push_back(std::move(e));
    }
    if (ds.entries.empty()) throw std::runtime_error("load_dataset: " + index_path.string() + " lists no items");
    if (any_mask && any_missing) throw std::runtime_error("load_dataset: masks present for some items only");
    ds.masks_present = any_mask;
    if (fs::exists(dir / "dataset.json")) {
        auto meta = nlohmann::json::parse(std::ifstream(dir / "dataset.json"));
        ds.seed = meta.value("seed", std::uint64_t{0});
    }
    return ds;
}

}  // namespace creagen

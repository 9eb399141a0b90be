#include "dbcd/data.hpp"

#include <cmath>
#include <filesystem>
#include <fstream>
#include <sstream>

#include "dbcd/baselines.hpp"

namespace dbcd {
namespace {

std::uint32_t read_be32(std::ifstream& in, const std::string& path) {
    std::uint8_t buf[4];
    in.read(reinterpret_cast<char*>(buf), 4);
    if (in.gcount() != 4) throw TruncatedFile("load_idx: truncated header in " + path);
    return (std::uint32_t(buf[0]) << 24) | (std::uint32_t(buf[1]) << 16) |
           (std::uint32_t(buf[2]) << 8) | std::uint32_t(buf[3]);
}

void write_be32(std::ofstream& out, std::uint32_t v) {
    const std::uint8_t buf[4] = {std::uint8_t(v >> 24), std::uint8_t(v >> 16), std::uint8_t(v >> 8),
                                 std::uint8_t(v)};
    out.write(reinterpret_cast<const char*>(buf), 4);
}

constexpr std::uint32_t kImagesMagic = 0x00000803;
constexpr std::uint32_t kLabelsMagic = 0x00000801;

} // namespace

void split_dataset(const LocalDataset& all, DeviceData& out) {
    const std::size_t n = all.n();
    const auto n_val = static_cast<std::size_t>(std::floor(0.2 * static_cast<double>(n)));
    const auto n_test = n_val;
    const std::size_t n_train = n - n_val - n_test;
    std::vector<std::size_t> idx(n);
    for (std::size_t i = 0; i < n; ++i) idx[i] = i;
    out.train = dataset_subset(all, {idx.begin(), idx.begin() + n_train});
    out.val = dataset_subset(all, {idx.begin() + n_train, idx.begin() + n_train + n_val});
    out.test = dataset_subset(all, {idx.begin() + n_train + n_val, idx.end()});
}

FederatedDataset gen_blobs(std::size_t devices, std::size_t per_device, std::size_t dims,
                           std::size_t classes, double heterogeneity, std::uint64_t seed,
                           double separation) {
    if (classes < 2) throw ValueOutOfRange("gen_blobs: need at least 2 classes");
    if (heterogeneity < 0 || heterogeneity > 1) {
        throw ValueOutOfRange("gen_blobs: heterogeneity must be in [0,1]");
    }
    SeededRng rng(mix_seed(seed, 0xb70b5));

    // Global class means, pairwise well separated relative to unit noise.
    if (!(separation > 0)) throw ValueOutOfRange("gen_blobs: separation must be > 0");
    const real sep = static_cast<real>(separation);
    std::vector<std::vector<real>> means(classes, std::vector<real>(dims));
    for (auto& m : means) {
        real norm_sq = 0;
        for (auto& x : m) {
            x = static_cast<real>(rng.normal());
            norm_sq += x * x;
        }
        const real inv = sep / std::max(real(1e-9), std::sqrt(norm_sq));
        for (auto& x : m) x *= inv;
    }

    FederatedDataset ds;
    ds.input_dim = dims;
    ds.class_count = classes;
    ds.devices.resize(devices);
    for (std::size_t a = 0; a < devices; ++a) {
        SeededRng dev_rng = rng.fork(a);
        DeviceData& dev = ds.devices[a];

        // Per-device mean shift; the profile is (1, shift) so the cosine of
        // two profiles is (1 + shift_a . shift_b) / 2: it tracks distribution
        // alignment, equals 1 for equal shifts, and never goes negative.
        dev.shift.resize(dims);
        real norm_sq = 0;
        for (auto& s : dev.shift) {
            s = static_cast<real>(dev_rng.normal());
            norm_sq += s * s;
        }
        const real inv = real(1) / std::max(real(1e-9), std::sqrt(norm_sq));
        for (auto& s : dev.shift) s *= inv;
        dev.profile.e.assign(1, real(1));
        dev.profile.e.insert(dev.profile.e.end(), dev.shift.begin(), dev.shift.end());

        const real shift_mag = static_cast<real>(heterogeneity) * sep / 2;
        LocalDataset all;
        all.x = Matrix(dims, per_device);
        all.y.resize(per_device);
        for (std::size_t j = 0; j < per_device; ++j) {
            const auto cls = static_cast<std::size_t>(dev_rng.next_below(classes));
            all.y[j] = static_cast<int>(cls);
            for (std::size_t r = 0; r < dims; ++r) {
                all.x(r, j) = means[cls][r] + shift_mag * dev.shift[r] +
                              static_cast<real>(dev_rng.normal());
            }
        }
        split_dataset(all, dev);
    }
    return ds;
}

LocalDataset load_idx(const std::string& images_path, const std::string& labels_path) {
    std::ifstream img(images_path, std::ios::binary);
    if (!img) throw Error("load_idx: cannot open " + images_path);
    const std::uint32_t img_magic = read_be32(img, images_path);
    if (img_magic != kImagesMagic) {
        throw BadMagic("load_idx: bad image magic in " + images_path);
    }
    const std::uint32_t count = read_be32(img, images_path);
    const std::uint32_t rows = read_be32(img, images_path);
    const std::uint32_t cols = read_be32(img, images_path);

    std::ifstream lbl(labels_path, std::ios::binary);
    if (!lbl) throw Error("load_idx: cannot open " + labels_path);
    const std::uint32_t lbl_magic = read_be32(lbl, labels_path);
    if (lbl_magic != kLabelsMagic) {
        throw BadMagic("load_idx: bad label magic in " + labels_path);
    }
    const std::uint32_t lbl_count = read_be32(lbl, labels_path);
    if (lbl_count != count) {
        throw CountMismatch("load_idx: " + std::to_string(count) + " images vs " +
                            std::to_string(lbl_count) + " labels");
    }

    const std::size_t dim = static_cast<std::size_t>(rows) * cols;
    LocalDataset out;
    out.x = Matrix(dim, count);
    out.y.resize(count);
    std::vector<std::uint8_t> pixel_row(dim);
    for (std::uint32_t j = 0; j < count; ++j) {
        img.read(reinterpret_cast<char*>(pixel_row.data()), static_cast<std::streamsize>(dim));
        if (img.gcount() != static_cast<std::streamsize>(dim)) {
            throw TruncatedFile("load_idx: truncated pixel data in " + images_path);
        }
        for (std::size_t r = 0; r < dim; ++r) {
            out.x(r, j) = static_cast<real>(pixel_row[r]) / real(255);
        }
        std::uint8_t label;
        lbl.read(reinterpret_cast<char*>(&label), 1);
        if (lbl.gcount() != 1) throw TruncatedFile("load_idx: truncated labels in " + labels_path);
        out.y[j] = static_cast<int>(label);
    }
    return out;
}

void write_idx_images(const std::string& path, std::size_t rows, std::size_t cols,
                      const std::vector<std::uint8_t>& pixels) {
    const std::size_t dim = rows * cols;
    if (dim == 0 || pixels.size() % dim != 0) {
        throw ShapeMismatch("write_idx_images: pixel count not a multiple of rows*cols");
    }
    std::ofstream out(path, std::ios::binary);
    if (!out) throw Error("write_idx_images: cannot open " + path);
    write_be32(out, kImagesMagic);
    write_be32(out, static_cast<std::uint32_t>(pixels.size() / dim));
    write_be32(out, static_cast<std::uint32_t>(rows));
    write_be32(out, static_cast<std::uint32_t>(cols));
    out.write(reinterpret_cast<const char*>(pixels.data()),
              static_cast<std::streamsize>(pixels.size()));
}

void write_idx_labels(const std::string& path, const std::vector<std::uint8_t>& labels) {
    std::ofstream out(path, std::ios::binary);
    if (!out) throw Error("write_idx_labels: cannot open " + path);
    write_be32(out, kLabelsMagic);
    write_be32(out, static_cast<std::uint32_t>(labels.size()));
    out.write(reinterpret_cast<const char*>(labels.data()),
              static_cast<std::streamsize>(labels.size()));
}

FederatedDataset distribute_evenly(const LocalDataset& samples, std::size_t class_count,
                                   std::size_t devices, std::uint64_t seed) {
    if (samples.n() < devices) throw ValueOutOfRange("distribute_evenly: fewer samples than devices");
    SeededRng rng(mix_seed(seed, 0xd157));
    const auto perm = rng.permutation(samples.n());
    const std::size_t shard = samples.n() / devices; // remainder dropped

    FederatedDataset ds;
    ds.input_dim = samples.x.rows();
    ds.class_count = class_count;
    ds.devices.resize(devices);
    for (std::size_t a = 0; a < devices; ++a) {
        const std::vector<std::size_t> idx(perm.begin() + static_cast<std::ptrdiff_t>(a * shard),
                                           perm.begin() + static_cast<std::ptrdiff_t>((a + 1) * shard));
        const LocalDataset local = dataset_subset(samples, idx);
        split_dataset(local, ds.devices[a]);
        ds.devices[a].profile.e = {1};
    }
    return ds;
}

LocalDataset subsample(const LocalDataset& train, const SparsityConfig& cfg) {
    if (!(cfg.r_percent > 0) || cfg.r_percent > 100) {
        throw ValueOutOfRange("subsample: r must be in (0, 100]");
    }
    const std::size_t n = train.n();
    const auto keep = static_cast<std::size_t>(
        std::ceil(static_cast<double>(n) * cfg.r_percent / 100.0));
    if (keep >= n) return train;
    SeededRng rng(mix_seed(cfg.seed, 0x5b5a));
    auto perm = rng.permutation(n);
    std::vector<std::size_t> idx(perm.begin(), perm.begin() + static_cast<std::ptrdiff_t>(keep));
    std::sort(idx.begin(), idx.end()); // keep the original sample order
    return dataset_subset(train, idx);
}

std::size_t samples_at_hour(std::size_t n, const ArrivalSchedule& schedule, int t) {
    if (t < 1 || t > schedule.hours) {
        throw HourOutOfRange("available_at_hour: hour " + std::to_string(t) + " not in 1.." +
                             std::to_string(schedule.hours));
    }
    return static_cast<std::size_t>(
        std::ceil(static_cast<double>(n) * static_cast<double>(t) /
                  static_cast<double>(schedule.hours)));
}

LocalDataset available_at_hour(const LocalDataset& train, const ArrivalSchedule& schedule, int t) {
    const std::size_t keep = samples_at_hour(train.n(), schedule, t);
    std::vector<std::size_t> idx(keep);
    for (std::size_t i = 0; i < keep; ++i) idx[i] = i;
    return dataset_subset(train, idx);
}

namespace {

void save_split_csv(const LocalDataset& d, const std::string& path) {
    std::ofstream out(path);
    if (!out) throw Error("save_dataset_csv: cannot open " + path);
    out.precision(17);
    for (std::size_t j = 0; j < d.n(); ++j) {
        out << d.y[j];
        for (std::size_t r = 0; r < d.x.rows(); ++r) out << ',' << d.x(r, j);
        out << '\n';
    }
}

LocalDataset load_split_csv(const std::string& path, std::size_t expected_dim) {
    std::ifstream in(path);
    if (!in) throw Error("load_dataset_csv: cannot open " + path);
    std::vector<std::vector<real>> features;
    std::vector<int> labels;
    std::string line;
    while (std::getline(in, line)) {
        if (line.empty()) continue;
        std::stringstream ss(line);
        std::string cell;
        std::getline(ss, cell, ',');
        labels.push_back(std::stoi(cell));
        std::vector<real> row;
        while (std::getline(ss, cell, ',')) row.push_back(static_cast<real>(std::stod(cell)));
        if (expected_dim && row.size() != expected_dim) {
            throw ShapeMismatch("load_dataset_csv: inconsistent feature count in " + path);
        }
        features.push_back(std::move(row));
    }
    LocalDataset out;
    const std::size_t dim = features.empty() ? expected_dim : features[0].size();
    out.x = Matrix(dim, features.size());
    out.y = std::move(labels);
    for (std::size_t j = 0; j < features.size(); ++j) {
        for (std::size_t r = 0; r < dim; ++r) out.x(r, j) = features[j][r];
    }
    return out;
}

} // namespace

void save_dataset_csv(const FederatedDataset& ds, const std::string& dir) {
    std::filesystem::create_directories(dir);
    for (std::size_t a = 0; a < ds.device_count(); ++a) {
        const std::string base = dir + "/device_" + std::to_string(a) + "_";
        save_split_csv(ds.devices[a].train, base + "train.csv");
        save_split_csv(ds.devices[a].val, base + "val.csv");
        save_split_csv(ds.devices[a].test, base + "test.csv");
    }
    std::vector<UserProfile> profiles;
    for (const auto& d : ds.devices) profiles.push_back(d.profile);
    save_profiles_csv(profiles, dir + "/profiles.csv");
    std::ofstream meta(dir + "/meta.csv");
    meta << ds.device_count() << ',' << ds.input_dim << ',' << ds.class_count << '\n';
}

FederatedDataset load_dataset_csv(const std::string& dir) {
    std::ifstream meta(dir + "/meta.csv");
    if (!meta) throw Error("load_dataset_csv: cannot open " + dir + "/meta.csv");
    std::string line;
    std::getline(meta, line);
    std::stringstream ss(line);
    std::string cell;
    std::getline(ss, cell, ',');
    const std::size_t devices = std::stoul(cell);
    std::getline(ss, cell, ',');
    const std::size_t input_dim = std::stoul(cell);
    std::getline(ss, cell, ',');
    const std::size_t classes = std::stoul(cell);

    FederatedDataset ds;
    ds.input_dim = input_dim;
    ds.class_count = classes;
    ds.devices.resize(devices);
    const auto profiles = load_profiles_csv(dir + "/profiles.csv");
    if (profiles.size() != devices) {
        throw CountMismatch("load_dataset_csv: profile count mismatch");
    }
    for (std::size_t a = 0; a < devices; ++a) {
        const std::string base = dir + "/device_" + std::to_string(a) + "_";
        ds.devices[a].train = load_split_csv(base + "train.csv", input_dim);
        ds.devices[a].val = load_split_csv(base + "val.csv", input_dim);
        ds.devices[a].test = load_split_csv(base + "test.csv", input_dim);
        ds.devices[a].profile = profiles[a];
    }
    return ds;
}

} // namespace dbcd

#pragma once

#include <cstdint>
#include <string>
#include <vector>

#include "dbcd/model.hpp"
#include "dbcd/network.hpp"

namespace dbcd {

// One device's data: 60/20/20 train/val/test split (train takes the rounding
// remainder), a profile vector for similarity, and the generator shift that
// produced the device's distribution (empty for real datasets).
struct DeviceData {
    LocalDataset train;
    LocalDataset val;
    LocalDataset test;
    UserProfile profile;
    std::vector<real> shift;
};

struct FederatedDataset {
    std::vector<DeviceData> devices;
    std::size_t input_dim = 0;
    std::size_t class_count = 0;

    std::size_t device_count() const { return devices.size(); }
};

struct SparsityConfig {
    double r_percent = 100; // in (0, 100]
    std::uint64_t seed = 0;
};

// Hourly data arrival: hour t exposes the first ceil(n * t / hours) training
// samples in a fixed per-device order, so each hour's data contains the
// previous hour's.
struct ArrivalSchedule {
    int hours = 10;
};

// Gaussian class blobs across devices. heterogeneity 0 gives every device
// identical class means; heterogeneity 1 applies a full-strength per-device
// mean shift. Profiles are (1, shift direction), so profile cosine tracks how
// similar two devices' distributions are. separation is the class-mean norm
// relative to unit noise.
FederatedDataset gen_blobs(std::size_t devices, std::size_t per_device, std::size_t dims,
                           std::size_t classes, double heterogeneity, std::uint64_t seed,
                           double separation = 4);

// IDX binary pair (big-endian, magic 0x803 for images and 0x801 for labels).
// Pixels scale to [0,1] and flatten to rows*cols features per column.
LocalDataset load_idx(const std::string& images_path, const std::string& labels_path);

// Writers for the same format (round-trip tests and data export).
void write_idx_images(const std::string& path, std::size_t rows, std::size_t cols,
                      const std::vector<std::uint8_t>& pixels);
void write_idx_labels(const std::string& path, const std::vector<std::uint8_t>& labels);

// Random even shards (remainder dropped), 60/20/20 split per shard, all-ones
// profiles so every pairwise similarity is exactly 1.
FederatedDataset distribute_evenly(const LocalDataset& samples, std::size_t class_count,
                                   std::size_t devices, std::uint64_t seed);

// Uniform subsample without replacement keeping ceil(n * r / 100) >= 1.
LocalDataset subsample(const LocalDataset& train, const SparsityConfig& cfg);

// Prefix of the training split available at hour t in 1..hours.
LocalDataset available_at_hour(const LocalDataset& train, const ArrivalSchedule& schedule, int t);
std::size_t samples_at_hour(std::size_t n, const ArrivalSchedule& schedule, int t);

// Per-device CSV interchange: label,feature...; one file per device and split
// plus profiles.csv, written under dir.
void save_dataset_csv(const FederatedDataset& ds, const std::string& dir);
FederatedDataset load_dataset_csv(const std::string& dir);

// 60/20/20 split helper (train gets the remainder).
void split_dataset(const LocalDataset& all, DeviceData& out);

} // namespace dbcd

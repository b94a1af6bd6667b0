#ifndef MVLAB_TEST_UTIL_HPP
#define MVLAB_TEST_UTIL_HPP

#include <filesystem>
#include <random>
#include <string>

#include "mvlab/image.hpp"

namespace mvlab::testutil {

/// Fresh directory under the system temp root, wiped on construction and
/// removed on destruction.
class TempDir {
  public:
    explicit TempDir(const std::string& tag) {
        path_ = std::filesystem::temp_directory_path() / ("mvlab_" + tag);
        std::filesystem::remove_all(path_);
        std::filesystem::create_directories(path_);
    }
    ~TempDir() {
        std::error_code ec;
        std::filesystem::remove_all(path_, ec);
    }
    TempDir(const TempDir&) = delete;
    TempDir& operator=(const TempDir&) = delete;

    const std::filesystem::path& path() const { return path_; }
    std::string str(const std::string& leaf = "") const {
        return leaf.empty() ? path_.string() : (path_ / leaf).string();
    }

  private:
    std::filesystem::path path_;
};

inline Image random_image(std::mt19937_64& rng, int height = 6, int width = 6,
                          int channels = 3) {
    std::uniform_real_distribution<double> unit(0.0, 1.0);
    Image img = Image::filled(height, width, channels);
    for (auto& p : img.pixels) p = unit(rng);
    return img;
}

}  // namespace mvlab::testutil

#endif  // MVLAB_TEST_UTIL_HPP

#ifndef MVLAB_IO_HPP
#define MVLAB_IO_HPP

#include <Eigen/Dense>
#include <cstdint>
#include <map>
#include <string>
#include <vector>

namespace mvlab {

/// Self-describing tensor container (safetensors layout: little-endian header
/// length, JSON header with name -> {dtype, shape, data_offsets}, raw data).
/// Tensors are written row-major as 64-bit floats.
void save_tensors(const std::string& path,
                  const std::vector<std::pair<std::string, const Eigen::MatrixXd*>>& tensors,
                  const std::map<std::string, std::string>& metadata);

struct LoadedTensors {
    std::map<std::string, Eigen::MatrixXd> tensors;
    std::map<std::string, std::string> metadata;
};

LoadedTensors load_tensors(const std::string& path);

/// Portable array file (npy v1.0, '<f8', C order).
void save_npy(const std::string& path, const std::vector<std::int64_t>& shape,
              const std::vector<double>& values);
struct NpyArray {
    std::vector<std::int64_t> shape;
    std::vector<double> values;
};
NpyArray load_npy(const std::string& path);

std::string read_text_file(const std::string& path);
void write_text_file(const std::string& path, const std::string& content);

/// FNV-1a digest of a file's bytes, as fixed-width hex.
std::string file_digest_hex(const std::string& path);

}  // namespace mvlab

#endif  // MVLAB_IO_HPP

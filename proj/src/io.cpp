#include "mvlab/io.hpp"

#include <cstring>
#include <fstream>
#include <sstream>

#include <nlohmann/json.hpp>

#include "mvlab/common.hpp"

namespace mvlab {

using json = nlohmann::json;

namespace {

void write_u64_le(std::ostream& os, std::uint64_t v) {
    unsigned char buf[8];
    for (int i = 0; i < 8; ++i) buf[i] = static_cast<unsigned char>((v >> (8 * i)) & 0xff);
    os.write(reinterpret_cast<const char*>(buf), 8);
}

std::uint64_t read_u64_le(std::istream& is) {
    unsigned char buf[8];
    is.read(reinterpret_cast<char*>(buf), 8);
    MV_CHECK(is.good(), "tensor file: truncated header length");
    std::uint64_t v = 0;
    for (int i = 0; i < 8; ++i) v |= static_cast<std::uint64_t>(buf[i]) << (8 * i);
    return v;
}

}  // namespace

void save_tensors(const std::string& path,
                  const std::vector<std::pair<std::string, const Eigen::MatrixXd*>>& tensors,
                  const std::map<std::string, std::string>& metadata) {
    json header = json::object();
    if (!metadata.empty()) {
        header["__metadata__"] = metadata;
    }
    std::uint64_t offset = 0;
    for (const auto& [name, mat] : tensors) {
        const std::uint64_t bytes = static_cast<std::uint64_t>(mat->size()) * sizeof(double);
        header[name] = {{"dtype", "F64"},
                        {"shape", {mat->rows(), mat->cols()}},
                        {"data_offsets", {offset, offset + bytes}}};
        offset += bytes;
    }
    const std::string header_str = header.dump();

    std::ofstream os(path, std::ios::binary);
    MV_CHECK(os.good(), "cannot open for writing: " + path);
    write_u64_le(os, header_str.size());
    os.write(header_str.data(), static_cast<std::streamsize>(header_str.size()));
    std::vector<double> row_major;
    for (const auto& [name, mat] : tensors) {
        row_major.resize(static_cast<std::size_t>(mat->size()));
        Eigen::Map<Eigen::Matrix<double, Eigen::Dynamic, Eigen::Dynamic, Eigen::RowMajor>>(
            row_major.data(), mat->rows(), mat->cols()) = *mat;
        os.write(reinterpret_cast<const char*>(row_major.data()),
                 static_cast<std::streamsize>(row_major.size() * sizeof(double)));
    }
    MV_CHECK(os.good(), "write failed: " + path);
}

LoadedTensors load_tensors(const std::string& path) {
    std::ifstream is(path, std::ios::binary);
    MV_CHECK(is.good(), "cannot open: " + path);
    const std::uint64_t header_len = read_u64_le(is);
    MV_CHECK(header_len < (1u << 26), "tensor file: implausible header length");
    std::string header_str(header_len, '\0');
    is.read(header_str.data(), static_cast<std::streamsize>(header_len));
    MV_CHECK(is.good(), "tensor file: truncated header");
    const json header = json::parse(header_str);

    LoadedTensors out;
    struct Entry {
        std::string name;
        Eigen::Index rows, cols;
        std::uint64_t begin, end;
    };
    std::vector<Entry> entries;
    for (const auto& [name, item] : header.items()) {
        if (name == "__metadata__") {
            for (const auto& [k, v] : item.items()) out.metadata[k] = v.get<std::string>();
            continue;
        }
        MV_CHECK(item.at("dtype").get<std::string>() == "F64",
                 "tensor file: unsupported dtype for " + name);
        const auto shape = item.at("shape").get<std::vector<std::int64_t>>();
        MV_CHECK(shape.size() == 2, "tensor file: expected rank-2 tensor for " + name);
        const auto offs = item.at("data_offsets").get<std::vector<std::uint64_t>>();
        entries.push_back({name, static_cast<Eigen::Index>(shape[0]),
                           static_cast<Eigen::Index>(shape[1]), offs.at(0), offs.at(1)});
    }
    const std::streampos data_start = is.tellg();
    for (const auto& e : entries) {
        const std::uint64_t bytes = e.end - e.begin;
        MV_CHECK(bytes == static_cast<std::uint64_t>(e.rows) * e.cols * sizeof(double),
                 "tensor file: byte count mismatch for " + e.name);
        std::vector<double> row_major(static_cast<std::size_t>(e.rows) * e.cols);
        is.seekg(data_start + static_cast<std::streamoff>(e.begin));
        is.read(reinterpret_cast<char*>(row_major.data()),
                static_cast<std::streamsize>(bytes));
        MV_CHECK(is.good(), "tensor file: truncated data for " + e.name);
        out.tensors[e.name] =
            Eigen::Map<Eigen::Matrix<double, Eigen::Dynamic, Eigen::Dynamic, Eigen::RowMajor>>(
                row_major.data(), e.rows, e.cols);
    }
    return out;
}

void save_npy(const std::string& path, const std::vector<std::int64_t>& shape,
              const std::vector<double>& values) {
    std::int64_t count = 1;
    for (auto s : shape) count *= s;
    MV_CHECK_ARG(count == static_cast<std::int64_t>(values.size()),
                 "save_npy: shape does not match value count");
    std::ostringstream dict;
    dict << "{'descr': '<f8', 'fortran_order': False, 'shape': (";
    for (std::size_t i = 0; i < shape.size(); ++i) {
        dict << shape[i];
        if (shape.size() == 1 || i + 1 < shape.size()) dict << (shape.size() == 1 ? "," : "");
        if (i + 1 < shape.size()) dict << ", ";
    }
    dict << "), }";
    std::string header = dict.str();
    const std::size_t base = 10 + header.size() + 1;
    header.append((64 - base % 64) % 64, ' ');
    header.push_back('\n');

    std::ofstream os(path, std::ios::binary);
    MV_CHECK(os.good(), "cannot open for writing: " + path);
    os.write("\x93NUMPY\x01\x00", 8);
    const std::uint16_t hlen = static_cast<std::uint16_t>(header.size());
    const unsigned char lenbuf[2] = {static_cast<unsigned char>(hlen & 0xff),
                                     static_cast<unsigned char>(hlen >> 8)};
    os.write(reinterpret_cast<const char*>(lenbuf), 2);
    os.write(header.data(), static_cast<std::streamsize>(header.size()));
    os.write(reinterpret_cast<const char*>(values.data()),
             static_cast<std::streamsize>(values.size() * sizeof(double)));
    MV_CHECK(os.good(), "write failed: " + path);
}

NpyArray load_npy(const std::string& path) {
    std::ifstream is(path, std::ios::binary);
    MV_CHECK(is.good(), "cannot open: " + path);
    char magic[8];
    is.read(magic, 8);
    MV_CHECK(is.good() && std::memcmp(magic, "\x93NUMPY", 6) == 0, "not an npy file: " + path);
    unsigned char lenbuf[2];
    is.read(reinterpret_cast<char*>(lenbuf), 2);
    const std::size_t hlen = lenbuf[0] | (static_cast<std::size_t>(lenbuf[1]) << 8);
    std::string header(hlen, '\0');
    is.read(header.data(), static_cast<std::streamsize>(hlen));
    MV_CHECK(header.find("'<f8'") != std::string::npos, "npy: expected '<f8' dtype");
    MV_CHECK(header.find("False") != std::string::npos, "npy: expected C order");
    const auto open = header.find('(');
    const auto close = header.find(')', open);
    MV_CHECK(open != std::string::npos && close != std::string::npos, "npy: malformed shape");
    NpyArray out;
    std::string token;
    std::istringstream shape_str(header.substr(open + 1, close - open - 1));
    while (std::getline(shape_str, token, ',')) {
        const auto first = token.find_first_not_of(" \t");
        if (first == std::string::npos) continue;
        out.shape.push_back(std::stoll(token.substr(first)));
    }
    std::int64_t count = 1;
    for (auto s : out.shape) count *= s;
    out.values.resize(static_cast<std::size_t>(count));
    is.read(reinterpret_cast<char*>(out.values.data()),
            static_cast<std::streamsize>(out.values.size() * sizeof(double)));
    MV_CHECK(is.good(), "npy: truncated data in " + path);
    return out;
}

std::string read_text_file(const std::string& path) {
    std::ifstream is(path, std::ios::binary);
    MV_CHECK(is.good(), "cannot open: " + path);
    std::ostringstream os;
    os << is.rdbuf();
    return os.str();
}

void write_text_file(const std::string& path, const std::string& content) {
    std::ofstream os(path, std::ios::binary);
    MV_CHECK(os.good(), "cannot open for writing: " + path);
    os.write(content.data(), static_cast<std::streamsize>(content.size()));
    MV_CHECK(os.good(), "write failed: " + path);
}

std::string file_digest_hex(const std::string& path) {
    const std::string bytes = read_text_file(path);
    const std::uint64_t h = fnv1a64(bytes);
    char buf[17];
    std::snprintf(buf, sizeof(buf), "%016llx", static_cast<unsigned long long>(h));
    return std::string(buf);
}

}  // namespace mvlab

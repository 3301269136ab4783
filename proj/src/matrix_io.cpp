#include "treeamp/matrix_io.hpp"

#include <bit>
#include <cstring>
#include <fstream>
#include <sstream>

namespace treeamp {

static_assert(std::endian::native == std::endian::little, "little-endian host required");

uint64_t ArrayData::count() const
{
    uint64_t n = 1;
    for (uint64_t d : dims) n *= d;
    return n;
}

namespace {

template <class T>
void put(std::ostream &os, T v)
{
    os.write(reinterpret_cast<const char *>(&v), sizeof(T));
}

template <class T>
T get(std::istream &is, const std::string &path)
{
    T v;
    if (!is.read(reinterpret_cast<char *>(&v), sizeof(T)))
        throw ConfigError(path + ": truncated header");
    return v;
}

ArrayData read_csv(const std::string &path, std::istream &is)
{
    ArrayData a;
    std::string line;
    uint64_t rows = 0, cols = 0;
    while (std::getline(is, line)) {
        if (line.empty() || line[0] == '#') continue;
        std::stringstream ss(line);
        std::string cell;
        uint64_t c = 0;
        while (std::getline(ss, cell, ',')) {
            try {
                size_t used = 0;
                a.data.push_back(std::stod(cell, &used));
            } catch (const std::exception &) {
                throw ConfigError(path + ": bad CSV value '" + cell + "' on row " + std::to_string(rows + 1));
            }
            ++c;
        }
        if (rows == 0) cols = c;
        if (c != cols) throw ConfigError(path + ": ragged CSV row " + std::to_string(rows + 1));
        ++rows;
    }
    if (rows == 0) throw ConfigError(path + ": empty CSV file");
    a.dims = cols == 1 ? std::vector<uint64_t>{rows} : std::vector<uint64_t>{rows, cols};
    return a;
}

} // namespace

void write_array_file(const std::string &path, const ArrayData &a)
{
    uint64_t n = a.count() * (a.complex ? 2 : 1);
    if (n != a.data.size()) throw ShapeMismatch("write_array_file: payload does not match dims");
    std::ofstream os(path, std::ios::binary);
    if (!os) throw ConfigError("cannot open '" + path + "' for writing");
    os.write("TAMP", 4);
    put<uint32_t>(os, kMatrixFileVersion);
    put<uint8_t>(os, a.complex ? 1 : 0);
    put<uint32_t>(os, uint32_t(a.dims.size()));
    for (uint64_t d : a.dims) put<uint64_t>(os, d);
    os.write(reinterpret_cast<const char *>(a.data.data()), std::streamsize(n * sizeof(double)));
    if (!os) throw ConfigError("write to '" + path + "' failed");
}

ArrayData read_array_file(const std::string &path)
{
    std::ifstream is(path, std::ios::binary);
    if (!is) throw ConfigError("cannot open '" + path + "'");
    char magic[4] = {0, 0, 0, 0};
    is.read(magic, 4);
    if (is.gcount() < 4 || std::memcmp(magic, "TAMP", 4) != 0) {
        is.clear();
        is.seekg(0);
        return read_csv(path, is);
    }
    uint32_t version = get<uint32_t>(is, path);
    if (version != kMatrixFileVersion)
        throw ConfigError(path + ": unsupported version " + std::to_string(version));
    uint8_t dtype = get<uint8_t>(is, path);
    if (dtype > 1) throw ConfigError(path + ": unknown dtype " + std::to_string(dtype));
    uint32_t ndim = get<uint32_t>(is, path);
    ArrayData a;
    a.complex = dtype == 1;
    for (uint32_t i = 0; i < ndim; ++i) a.dims.push_back(get<uint64_t>(is, path));
    uint64_t n = a.count() * (a.complex ? 2 : 1);
    a.data.resize(n);
    if (!is.read(reinterpret_cast<char *>(a.data.data()), std::streamsize(n * sizeof(double))))
        throw ConfigError(path + ": payload shorter than its dims");
    if (is.peek() != std::char_traits<char>::eof()) throw ConfigError(path + ": trailing bytes after payload");
    return a;
}

void write_matrix_file(const std::string &path, const Mat &W)
{
    ArrayData a;
    a.dims = {uint64_t(W.rows()), uint64_t(W.cols())};
    a.data.resize(W.size());
    Eigen::Map<Eigen::Matrix<double, Eigen::Dynamic, Eigen::Dynamic, Eigen::RowMajor>>(
        a.data.data(), W.rows(), W.cols()) = W;
    write_array_file(path, a);
}

void write_vector_file(const std::string &path, const Vec &v)
{
    ArrayData a;
    a.dims = {uint64_t(v.size())};
    a.data.assign(v.data(), v.data() + v.size());
    write_array_file(path, a);
}

Mat read_matrix_file(const std::string &path)
{
    ArrayData a = read_array_file(path);
    if (a.complex) throw ConfigError(path + ": expected a real matrix");
    if (a.dims.size() == 1) a.dims.push_back(1);
    if (a.dims.size() != 2) throw ConfigError(path + ": expected a 2-D array");
    return Eigen::Map<const Eigen::Matrix<double, Eigen::Dynamic, Eigen::Dynamic, Eigen::RowMajor>>(
        a.data.data(), Index(a.dims[0]), Index(a.dims[1]));
}

Vec read_vector_file(const std::string &path)
{
    ArrayData a = read_array_file(path);
    if (a.complex) throw ConfigError(path + ": expected real data");
    return Eigen::Map<const Vec>(a.data.data(), Index(a.data.size()));
}

} // namespace treeamp

#ifndef TREEAMP_MATRIX_IO_HPP
#define TREEAMP_MATRIX_IO_HPP

#include "treeamp/factor.hpp"

#include <cstdint>

namespace treeamp {

// Binary array file: "TAMP", u32 version, u8 dtype (0 real, 1 complex
// interleaved), u32 ndim, u64 dims[ndim], then row-major little-endian f64.
struct ArrayData {
    std::vector<uint64_t> dims;
    bool complex = false;
    std::vector<double> data;  // complex: (re, im) pairs

    uint64_t count() const;
};

constexpr uint32_t kMatrixFileVersion = 1;

void write_array_file(const std::string &path, const ArrayData &a);
// Reads the binary format, or CSV (1-D or 2-D real) when the magic is absent.
ArrayData read_array_file(const std::string &path);

void write_matrix_file(const std::string &path, const Mat &W);
void write_vector_file(const std::string &path, const Vec &v);
// 2-D real array as a matrix (1-D becomes a column)
Mat read_matrix_file(const std::string &path);
// any real array flattened in row-major order
Vec read_vector_file(const std::string &path);

} // namespace treeamp

#endif

#pragma once

#include <string>
#include <vector>

#include "tdn/mat.hpp"

namespace tdn {

// Tensor container: magic "TDN1", u32 LE rank, rank x u32 LE dims,
// row-major IEEE-754 float32 LE payload. No padding.
void write_tdn1(const std::string& path, const std::vector<int>& dims,
                const std::vector<double>& data);

struct Tdn1 {
    std::vector<int> dims;
    std::vector<double> data;  // widened from the stored float32
};
Tdn1 read_tdn1(const std::string& path);

void write_mat(const std::string& path, const Mat& m);
Mat read_mat(const std::string& path);

// Checkpoint archive: plain-text manifest (name, shape, byte offset into the
// data section) followed by the entries' TDN1 containers back to back.
struct ArchiveEntry {
    std::string name;
    std::vector<int> dims;
    std::vector<double> data;
};

void write_archive(const std::string& path, const std::vector<ArchiveEntry>& entries);
std::vector<ArchiveEntry> read_archive(const std::string& path);

}  // namespace tdn

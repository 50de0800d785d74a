#pragma once

#include <cstdint>
#include <filesystem>
#include <span>
#include <string>
#include <vector>

#include "confreg/error.hpp"
#include "confreg/eval.hpp"
#include "confreg/net.hpp"
#include "confreg/opt.hpp"
#include "confreg/volume.hpp"

namespace confreg {

// Distinct failure kinds of volume ingestion.
class UnreadableFileError : public DataError {
public:
    using DataError::DataError;
};

class SizeMismatchError : public DataError {
public:
    using DataError::DataError;
};

class UnknownElementTypeError : public DataError {
public:
    using DataError::DataError;
};

enum class ElementType { uint8, int16, uint16, float32 };
enum class ByteOrder { little, big };

ElementType parse_element_type(const std::string& name); // MET_SHORT or int16 style
std::string element_type_name(ElementType type);          // MET_* spelling
std::size_t element_size(ElementType type);

// MetaImage-style header. `data_path` is resolved relative to the header.
struct VolumeHeader {
    Index3 dims{1, 1, 1};
    Vec3 spacing{1.0, 1.0, 1.0};
    Vec3 origin{0.0, 0.0, 0.0};
    ElementType element_type = ElementType::float32;
    ByteOrder byte_order = ByteOrder::little;
    int channels = 1;
    std::filesystem::path data_path;

    Geometry geometry() const { return Geometry{dims, spacing, origin}; }
};

VolumeHeader read_header(const std::filesystem::path& header_path);

// Reads a .mhd header and its payload.
Volume read_volume(const std::filesystem::path& header_path);

// Reads a headerless payload; geometry and encoding come from `spec`
// (its data_path is ignored).
Volume read_raw_volume(const std::filesystem::path& raw_path, const VolumeHeader& spec);

// Writes `<stem>.mhd` plus `<stem>.raw` next to it. Values are rounded to
// integer types; throws DataError if they do not fit.
void write_volume(const std::filesystem::path& header_path, const Volume& vol,
                  ElementType type = ElementType::float32);

// Three-channel float32 displacement field on a grid.
void write_vector_field(const std::filesystem::path& header_path, const Geometry& geometry,
                        std::span<const Vec3> field);

// Nonzero voxels of a volume file; its grid must match `expected`.
std::vector<std::uint8_t> read_mask(const std::filesystem::path& path, const Geometry& expected);

// Whitespace-separated triples, one per line; blank lines ignored.
std::vector<Vec3> read_landmarks(const std::filesystem::path& path);
std::vector<Vec3> parse_landmarks(const std::string& text, const std::string& origin = "<landmarks>");
void write_landmarks(const std::filesystem::path& path, std::span<const Vec3> points);

// Checkpoint layout is documented in docs/FORMATS.md.
void write_checkpoint(const std::filesystem::path& path, const DeformationModel& model);
DeformationModel read_checkpoint(const std::filesystem::path& path);

void write_tre_report(const std::filesystem::path& json_path, const std::filesystem::path& csv_path,
                      const TreResult& result);
void write_jacdet_summary(const std::filesystem::path& json_path, const std::filesystem::path& csv_path,
                          const JacDetField& field);
void write_training_log(const std::filesystem::path& csv_path, std::span<const LogRecord> log);

std::string read_text_file(const std::filesystem::path& path);

} // namespace confreg

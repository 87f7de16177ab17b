#pragma once

#include <filesystem>
#include <map>
#include <string>
#include <vector>

#include <json.hpp>

#include "mvc/caption.hpp"
#include "mvc/tensor.hpp"

namespace mvc {

enum class Provenance { real, synthetic, synthetic_external };

const char* to_string(Provenance p);
Provenance provenance_from_string(const std::string& s);

// Record paths are stored relative to the manifest's directory; base_dir below
// is that directory.
struct DatasetRecord {
    std::string path;
    std::string label;
    std::string caption;
    Provenance provenance = Provenance::real;
    nlohmann::json meta;  // generator metadata for synthetic records
};

struct DatasetManifest {
    std::vector<std::string> classes;
    std::vector<DatasetRecord> records;
    std::filesystem::path base_dir;

    int class_index(const std::string& label) const;  // -1 when absent
    std::vector<std::size_t> indices_of(const std::string& label) const;
    std::vector<std::size_t> indices_with(Provenance p) const;
    std::filesystem::path resolve(const DatasetRecord& record) const;
};

void write_manifest(const std::filesystem::path& path, const DatasetManifest& manifest);
DatasetManifest load_manifest(const std::filesystem::path& path);

// Checks every record: label in the class list, path loads, and all images
// share one shape (returned as CHW).
std::vector<int> validate_manifest(const DatasetManifest& manifest);

ImageTensor load_record_image(const DatasetManifest& manifest, const DatasetRecord& record);

// Per-class caption pools built from the records with the given provenance
// (training pools come from real records only).
std::map<std::string, CaptionPool> caption_pools(const DatasetManifest& manifest,
                                                 Provenance provenance);

}  // namespace mvc

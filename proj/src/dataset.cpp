#include "mvc/dataset.hpp"

#include <fstream>

#include "mvc/errors.hpp"
#include "mvc/image_io.hpp"

namespace mvc {

const char* to_string(Provenance p) {
    switch (p) {
        case Provenance::real: return "real";
        case Provenance::synthetic: return "synthetic";
        case Provenance::synthetic_external: return "synthetic(external)";
    }
    return "unknown";
}

Provenance provenance_from_string(const std::string& s) {
    if (s == "real") return Provenance::real;
    if (s == "synthetic") return Provenance::synthetic;
    if (s == "synthetic(external)") return Provenance::synthetic_external;
    fail(ErrorKind::parse, "unknown provenance: " + s);
}

int DatasetManifest::class_index(const std::string& label) const {
    for (std::size_t i = 0; i < classes.size(); ++i)
        if (classes[i] == label) return static_cast<int>(i);
    return -1;
}

std::vector<std::size_t> DatasetManifest::indices_of(const std::string& label) const {
    std::vector<std::size_t> out;
    for (std::size_t i = 0; i < records.size(); ++i)
        if (records[i].label == label) out.push_back(i);
    return out;
}

std::vector<std::size_t> DatasetManifest::indices_with(Provenance p) const {
    std::vector<std::size_t> out;
    for (std::size_t i = 0; i < records.size(); ++i)
        if (records[i].provenance == p) out.push_back(i);
    return out;
}

std::filesystem::path DatasetManifest::resolve(const DatasetRecord& record) const {
    const std::filesystem::path p(record.path);
    return p.is_absolute() ? p : base_dir / p;
}

void write_manifest(const std::filesystem::path& path, const DatasetManifest& manifest) {
    nlohmann::json j;
    j["version"] = 1;
    j["classes"] = manifest.classes;
    nlohmann::json records = nlohmann::json::array();
    for (const DatasetRecord& r : manifest.records) {
        nlohmann::json rec = {{"path", r.path},
                              {"label", r.label},
                              {"caption", r.caption},
                              {"provenance", to_string(r.provenance)}};
        rec["meta"] = r.meta.is_null() ? nlohmann::json::object() : r.meta;
        records.push_back(std::move(rec));
    }
    j["records"] = std::move(records);
    std::ofstream f(path, std::ios::binary);
    require(f.good(), ErrorKind::storage, "cannot open " + path.string() + " for writing");
    f << j.dump(2) << "\n";
    require(f.good(), ErrorKind::storage, "write failed for " + path.string());
}

DatasetManifest load_manifest(const std::filesystem::path& path) {
    std::ifstream f(path, std::ios::binary);
    require(f.good(), ErrorKind::storage, "cannot open " + path.string());
    nlohmann::json j = nlohmann::json::parse(f, nullptr, false);
    require(!j.is_discarded(), ErrorKind::parse, "malformed JSON in " + path.string());
    require(j.is_object() && j.value("version", 0) == 1, ErrorKind::parse,
            "unsupported manifest version in " + path.string());
    require(j.contains("classes") && j["classes"].is_array() && j.contains("records") &&
                j["records"].is_array(),
            ErrorKind::parse, "manifest missing classes/records: " + path.string());
    DatasetManifest m;
    m.base_dir = path.has_parent_path() ? path.parent_path() : std::filesystem::path(".");
    m.classes = j["classes"].get<std::vector<std::string>>();
    for (const auto& rec : j["records"]) {
        require(rec.is_object() && rec.contains("path") && rec.contains("label") &&
                    rec.contains("provenance"),
                ErrorKind::parse, "malformed record in " + path.string());
        DatasetRecord r;
        r.path = rec["path"].get<std::string>();
        r.label = rec["label"].get<std::string>();
        r.caption = rec.value("caption", "");
        r.provenance = provenance_from_string(rec["provenance"].get<std::string>());
        r.meta = rec.value("meta", nlohmann::json::object());
        m.records.push_back(std::move(r));
    }
    return m;
}

std::vector<int> validate_manifest(const DatasetManifest& manifest) {
    require(!manifest.records.empty(), ErrorKind::invalid_argument, "manifest has no records");
    std::vector<int> shape;
    for (const DatasetRecord& r : manifest.records) {
        require(manifest.class_index(r.label) >= 0, ErrorKind::parse,
                "record label not in class list: " + r.label);
        const ImageTensor img = load_record_image(manifest, r);
        if (shape.empty())
            shape = img.shape;
        else
            require(img.shape == shape, ErrorKind::shape,
                    "image shape mismatch at " + r.path + ": " + shape_string(img.shape) +
                        " vs " + shape_string(shape));
    }
    return shape;
}

ImageTensor load_record_image(const DatasetManifest& manifest, const DatasetRecord& record) {
    return image_to_tensor(load_gray_image(manifest.resolve(record)));
}

std::map<std::string, CaptionPool> caption_pools(const DatasetManifest& manifest,
                                                 Provenance provenance) {
    std::map<std::string, CaptionPool> pools;
    for (const DatasetRecord& r : manifest.records) {
        if (r.provenance != provenance) continue;
        CaptionPool& pool = pools[r.label];
        pool.class_label = r.label;
        // records carry bare descriptors; templating adds the class prefix
        pool.captions.push_back(r.caption.empty()
                                    ? build_caption(r.label)
                                    : build_caption(r.label, r.caption));
    }
    return pools;
}

}  // namespace mvc

#pragma once

// Code-system services: CCS-style diagnosis grouping, Quan coding of the
// Charlson comorbidity index, and RUCC rural-urban lookup. Mapping content
// ships as data files; these classes hold the loaded tables.
//
//   ccs_map.csv       icd_version,code_prefix,category_id,category_label
//   charlson_map.csv  icd_version,code_prefix,category,weight,supersedes
//   rucc.csv          county_fips,rucc_code,label

#include <algorithm>
#include <map>
#include <optional>
#include <set>
#include <string>
#include <unordered_map>
#include <utility>
#include <vector>

#include "ch/csv.hpp"
#include "ch/records.hpp"

namespace ch {

namespace detail {

// Longest-prefix table over normalized codes, one bucket per ICD version.
class PrefixIndex {
public:
    // Returns false if (version, prefix) was already present.
    bool insert(IcdVersion version, const std::string& prefix, std::size_t payload) {
        return bucket(version).emplace(prefix, payload).second;
    }

    // Payload of the longest prefix of `code`, if any.
    std::optional<std::size_t> lookup(IcdVersion version, const std::string& code) const {
        const auto& map = version == IcdVersion::icd9 ? icd9_ : icd10_;
        for (std::size_t len = code.size(); len >= 1; --len) {
            auto it = map.find(code.substr(0, len));
            if (it != map.end()) return it->second;
        }
        return std::nullopt;
    }

private:
    std::unordered_map<std::string, std::size_t>& bucket(IcdVersion version) {
        return version == IcdVersion::icd9 ? icd9_ : icd10_;
    }

    std::unordered_map<std::string, std::size_t> icd9_;
    std::unordered_map<std::string, std::size_t> icd10_;
};

// A trailing wildcard on a prefix pattern is redundant; drop it.
inline std::string strip_trailing_wildcard(std::string pattern) {
    if (!pattern.empty() && (pattern.back() == 'x' || pattern.back() == 'X')) pattern.pop_back();
    return pattern;
}

} // namespace detail

// --------------------------------------------------------------------------
// CCS grouping

class CcsMap {
public:
    struct Entry {
        IcdVersion icd_version;
        std::string pattern;
        int category_id;
        std::string label;
    };

    static CcsMap load(const std::string& path) {
        CcsMap map;
        LoadReport report;
        detail::TableReader table(path, {"icd_version", "code_prefix", "category_id",
                                         "category_label"},
                                  /*lenient=*/false, report);
        table.for_each([&](const std::vector<std::string>& f, const std::string& where) {
            Entry e;
            e.icd_version = icd_version_from_string(f[0], where);
            e.pattern = detail::strip_trailing_wildcard(normalize_icd(f[1], e.icd_version));
            e.category_id = static_cast<int>(parse_int(f[2], where));
            if (e.category_id < 1) throw_error(ErrorKind::data, "category_id must be >= 1");
            e.label = f[3];
            if (!map.index_.insert(e.icd_version, e.pattern, map.entries_.size())) {
                throw_error(ErrorKind::data, "duplicate code_prefix '" + f[1] + "'");
            }
            auto it = map.labels_.find(e.category_id);
            if (it == map.labels_.end()) {
                map.labels_.emplace(e.category_id, e.label);
            } else if (it->second != e.label) {
                throw_error(ErrorKind::data, "conflicting labels for category " +
                                                 std::to_string(e.category_id));
            }
            map.entries_.push_back(std::move(e));
        });
        return map;
    }

    // Category of the longest matching prefix entry; absent if none matches.
    std::optional<int> lookup(IcdVersion version, const std::string& code) const {
        auto hit = index_.lookup(version, code);
        if (!hit) return std::nullopt;
        return entries_[*hit].category_id;
    }

    // Distinct category ids in ascending order (the feature-schema order).
    std::vector<int> category_ids() const {
        std::vector<int> ids;
        ids.reserve(labels_.size());
        for (const auto& [id, label] : labels_) ids.push_back(id);
        return ids;
    }

    const std::string& category_label(int id) const {
        auto it = labels_.find(id);
        if (it == labels_.end()) {
            throw_error(ErrorKind::data, "unknown CCS category " + std::to_string(id));
        }
        return it->second;
    }

    std::size_t size() const { return entries_.size(); }

private:
    std::vector<Entry> entries_;
    detail::PrefixIndex index_;
    std::map<int, std::string> labels_; // ordered: category_ids() is ascending
};

// --------------------------------------------------------------------------
// Charlson comorbidity index (Quan coding)

class CharlsonMap {
public:
    static CharlsonMap load(const std::string& path) {
        CharlsonMap map;
        LoadReport report;
        detail::TableReader table(path, {"icd_version", "code_prefix", "category", "weight",
                                         "supersedes"},
                                  /*lenient=*/false, report);
        table.for_each([&](const std::vector<std::string>& f, const std::string& where) {
            IcdVersion version = icd_version_from_string(f[0], where);
            std::string pattern = detail::strip_trailing_wildcard(normalize_icd(f[1], version));
            const std::string& category = f[2];
            int weight = static_cast<int>(parse_int(f[3], where));
            if (weight != 1 && weight != 2 && weight != 3 && weight != 6) {
                throw_error(ErrorKind::data, "weight must be one of 1,2,3,6");
            }
            const std::string& supersedes = f[4];

            std::size_t cat = map.category_index(category);
            auto& info = map.categories_[cat];
            if (info.weight == 0) {
                info.weight = weight;
            } else if (info.weight != weight) {
                throw_error(ErrorKind::data, "category '" + category + "' has two weights");
            }
            if (!supersedes.empty()) {
                if (!info.supersedes.empty() && info.supersedes != supersedes) {
                    throw_error(ErrorKind::data,
                                "category '" + category + "' supersedes two categories");
                }
                info.supersedes = supersedes;
            }
            if (!map.index_.insert(version, pattern, cat)) {
                throw_error(ErrorKind::data, "duplicate code_prefix '" + f[1] + "'");
            }
        });
        // Resolve supersedes names once all categories are known.
        for (auto& c : map.categories_) {
            if (c.supersedes.empty()) continue;
            auto it = map.category_by_name_.find(c.supersedes);
            if (it == map.category_by_name_.end()) {
                throw_error(ErrorKind::data, "supersedes references unknown category '" +
                                                 c.supersedes + "'");
            }
            c.supersedes_index = static_cast<std::ptrdiff_t>(it->second);
        }
        return map;
    }

    std::optional<std::string> lookup_category(IcdVersion version, const std::string& code) const {
        auto hit = index_.lookup(version, code);
        if (!hit) return std::nullopt;
        return categories_[*hit].name;
    }

    // Weighted sum over the distinct comorbidity categories present. With the
    // hierarchy applied, a category suppresses the one it supersedes (severe
    // liver disease silences mild, etc.).
    int cci(const std::vector<std::pair<IcdVersion, std::string>>& diagnoses,
            bool apply_hierarchy = true) const {
        std::vector<bool> present(categories_.size(), false);
        for (const auto& [version, code] : diagnoses) {
            auto hit = index_.lookup(version, code);
            if (hit) present[*hit] = true;
        }
        if (apply_hierarchy) {
            for (std::size_t i = 0; i < categories_.size(); ++i) {
                if (present[i] && categories_[i].supersedes_index >= 0) {
                    present[static_cast<std::size_t>(categories_[i].supersedes_index)] = false;
                }
            }
        }
        int score = 0;
        for (std::size_t i = 0; i < categories_.size(); ++i) {
            if (present[i]) score += categories_[i].weight;
        }
        return score;
    }

    int max_score() const {
        int total = 0;
        for (const auto& c : categories_) total += c.weight;
        return total;
    }

    std::vector<std::string> category_names() const {
        std::vector<std::string> names;
        names.reserve(categories_.size());
        for (const auto& c : categories_) names.push_back(c.name);
        return names;
    }

    int category_weight(const std::string& name) const {
        auto it = category_by_name_.find(name);
        if (it == category_by_name_.end()) {
            throw_error(ErrorKind::data, "unknown Charlson category '" + name + "'");
        }
        return categories_[it->second].weight;
    }

private:
    struct Category {
        std::string name;
        int weight = 0;
        std::string supersedes;
        std::ptrdiff_t supersedes_index = -1;
    };

    std::size_t category_index(const std::string& name) {
        auto it = category_by_name_.find(name);
        if (it != category_by_name_.end()) return it->second;
        categories_.push_back(Category{name, 0, "", -1});
        category_by_name_.emplace(name, categories_.size() - 1);
        return categories_.size() - 1;
    }

    std::vector<Category> categories_;
    std::unordered_map<std::string, std::size_t> category_by_name_;
    detail::PrefixIndex index_;
};

// --------------------------------------------------------------------------
// Rural-Urban Continuum Codes

inline const char* canonical_rucc_label(int code) {
    switch (code) {
        case 1: return "Metro, ≥1 million";
        case 2: return "Metro, 250,000 to 1 million";
        case 3: return "Metro, <250,000";
        case 4: return "Nonmetro, ≥20,000, adjacent to metro";
        case 5: return "Nonmetro, ≥20,000, not adjacent to metro";
        case 6: return "Nonmetro, 5,000 to 20,000, adjacent to metro";
        case 7: return "Nonmetro, 5,000 to 20,000, not adjacent to metro";
        case 8: return "Nonmetro, <5,000, adjacent to metro";
        case 9: return "Nonmetro, <5,000, not adjacent to metro";
        default: return "Unknown";
    }
}

class RuccTable {
public:
    struct Row {
        int rucc_code;
        std::string label;
    };

    static RuccTable load(const std::string& path) {
        RuccTable table;
        LoadReport report;
        detail::TableReader reader(path, {"county_fips", "rucc_code", "label"},
                                   /*lenient=*/false, report);
        reader.for_each([&](const std::vector<std::string>& f, const std::string& where) {
            const std::string& fips = f[0];
            if (fips.size() != 5) throw_error(ErrorKind::data, "county_fips must be 5 characters");
            int code = static_cast<int>(parse_int(f[1], where));
            if (code < 1 || code > 9) throw_error(ErrorKind::data, "rucc_code must be in [1,9]");
            if (!table.rows_.emplace(fips, Row{code, f[2]}).second) {
                throw_error(ErrorKind::data, "duplicate county_fips '" + fips + "'");
            }
        });
        return table;
    }

    // Absent when the FIPS is unknown; the caller maps absence to the
    // "Unknown" rural-urban category rather than dropping the patient.
    std::optional<Row> lookup(const std::string& county_fips) const {
        auto it = rows_.find(county_fips);
        if (it == rows_.end()) return std::nullopt;
        return it->second;
    }

    // First FIPS listed for each code, used by the synthetic generator.
    std::map<int, std::string> representative_fips() const {
        std::map<int, std::string> out;
        std::map<std::string, Row> ordered(rows_.begin(), rows_.end());
        for (const auto& [fips, row] : ordered) {
            out.emplace(row.rucc_code, fips);
        }
        return out;
    }

    std::size_t size() const { return rows_.size(); }

private:
    std::unordered_map<std::string, Row> rows_;
};

} // namespace ch

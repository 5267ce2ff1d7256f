#include "judgekit/dataset.hpp"

#include <fstream>
#include <sstream>
#include <unordered_set>

#include <json.hpp>

#include "judgekit/registry.hpp"
#include "judgekit/util.hpp"

namespace judgekit {

using nlohmann::json;

const char* split_name(Split split) {
    return split == Split::Train ? "train" : "test";
}

Split split_from_string(std::string_view text) {
    if (text == "train") return Split::Train;
    if (text == "test") return Split::Test;
    throw std::invalid_argument("split must be 'train' or 'test', got '" +
                                std::string(text) + "'");
}

long DatasetManifest::train_total() const {
    long total = 0;
    for (const auto& row : rows) total += row.train;
    return total;
}

long DatasetManifest::test_total() const {
    long total = 0;
    for (const auto& row : rows) total += row.test;
    return total;
}

const ManifestRow* DatasetManifest::find(std::string_view task_id,
                                         std::string_view aspect_id) const {
    for (const auto& row : rows) {
        if (row.task_id == task_id && row.aspect_id == aspect_id) return &row;
    }
    return nullptr;
}

ManifestRow& DatasetManifest::row_for(std::string_view task_id,
                                      std::string_view aspect_id) {
    for (auto& row : rows) {
        if (row.task_id == task_id && row.aspect_id == aspect_id) return row;
    }
    rows.push_back(ManifestRow{std::string(task_id), std::string(aspect_id), 0, 0});
    return rows.back();
}

DatasetManifest DatasetManifest::masked(
    const std::set<std::string>& masked_aspects) const {
    DatasetManifest out = *this;
    for (auto& row : out.rows) {
        if (masked_aspects.contains(row.aspect_id)) row.train = 0;
    }
    return out;
}

DatasetManifest DatasetManifest::from_instances(
    std::span<const EvalInstance> instances) {
    DatasetManifest manifest;
    for (const EvalInstance& instance : instances) {
        ManifestRow& row = manifest.row_for(instance.task_id, instance.aspect_id);
        if (instance.split == Split::Train) {
            ++row.train;
        } else {
            ++row.test;
        }
    }
    return manifest;
}

DatasetError::DatasetError(long line, const std::string& message)
    : std::runtime_error(line > 0 ? "line " + std::to_string(line) + ": " + message
                                  : message),
      line_(line) {}

namespace {

EvalInstance instance_from_json(const json& record) {
    EvalInstance instance;
    instance.instance_id = record.at("instance_id").get<std::string>();
    instance.task_id = record.at("task").get<std::string>();
    instance.aspect_id = record.at("aspect").get<std::string>();
    for (const auto& [label, text] : record.at("slots").items()) {
        instance.slots.emplace(label, text.get<std::string>());
    }
    instance.gold = record.at("gold").get<double>();
    instance.split = split_from_string(record.at("split").get<std::string>());
    if (record.contains("has_claims")) {
        instance.has_claims = record.at("has_claims").get<bool>();
    }
    return instance;
}

}  // namespace

LoadedDataset load_dataset(const std::filesystem::path& path,
                           const AspectRegistry& registry) {
    std::ifstream in(path);
    if (!in) {
        throw DatasetError(0, "cannot open dataset file: " + path.string());
    }

    LoadedDataset result;
    std::unordered_set<std::string> seen_ids;
    std::string line;
    long line_number = 0;
    while (std::getline(in, line)) {
        ++line_number;
        if (line.empty()) continue;

        EvalInstance instance;
        try {
            instance = instance_from_json(json::parse(line));
        } catch (const json::exception& e) {
            throw DatasetError(line_number, std::string("malformed record: ") + e.what());
        } catch (const std::invalid_argument& e) {
            throw DatasetError(line_number, e.what());
        }

        if (!seen_ids.insert(instance.instance_id).second) {
            throw DatasetError(line_number,
                               "duplicate instance_id '" + instance.instance_id + "'");
        }

        const AspectSpec* aspect = registry.find(instance.task_id, instance.aspect_id);
        if (!aspect) {
            throw DatasetError(line_number, "instance '" + instance.instance_id +
                                                "' references unregistered aspect " +
                                                instance.task_id + "/" +
                                                instance.aspect_id);
        }
        if (!aspect->rubric.contains(instance.gold)) {
            throw DatasetError(line_number,
                               "instance '" + instance.instance_id + "': gold score " +
                                   format_score(instance.gold) +
                                   " is not in the rubric of " + aspect->key());
        }
        for (const std::string& label : aspect->answer_slot_labels) {
            const auto it = instance.slots.find(label);
            if (it == instance.slots.end() || it->second.empty()) {
                throw DatasetError(line_number, "instance '" + instance.instance_id +
                                                    "': required slot '" + label +
                                                    "' is missing or empty");
            }
        }
        result.instances.push_back(std::move(instance));
    }

    result.manifest = DatasetManifest::from_instances(result.instances);
    return result;
}

DatasetManifest load_expected_manifest(const std::filesystem::path& path) {
    json doc;
    try {
        doc = json::parse(read_text_file(path));
    } catch (const json::exception& e) {
        throw std::runtime_error("expected manifest " + path.string() + ": " + e.what());
    }

    DatasetManifest manifest;
    for (const json& row : doc.at("rows")) {
        manifest.rows.push_back(ManifestRow{row.at("task").get<std::string>(),
                                            row.at("aspect").get<std::string>(),
                                            row.at("train").get<long>(),
                                            row.at("test").get<long>()});
    }
    if (doc.contains("totals")) {
        const long train = doc["totals"].at("train").get<long>();
        const long test = doc["totals"].at("test").get<long>();
        if (train != manifest.train_total() || test != manifest.test_total()) {
            throw std::runtime_error("expected manifest " + path.string() +
                                     ": declared totals do not equal the sum of rows");
        }
    }
    return manifest;
}

std::string ManifestValidation::render() const {
    std::ostringstream out;
    if (pass) {
        out << "manifest validation: PASS\n";
        return out.str();
    }
    out << "manifest validation: FAIL (" << diffs.size() << " mismatch"
        << (diffs.size() == 1 ? "" : "es") << ")\n";
    for (const std::string& diff : diffs) {
        out << "  " << diff << "\n";
    }
    return out.str();
}

ManifestValidation validate_manifest(const DatasetManifest& actual,
                                     const DatasetManifest& expected) {
    ManifestValidation report;
    auto mismatch = [&report](const std::string& what, long want, long got) {
        report.pass = false;
        report.diffs.push_back(what + ": expected " + std::to_string(want) + ", got " +
                               std::to_string(got));
    };

    for (const ManifestRow& want : expected.rows) {
        const ManifestRow* got = actual.find(want.task_id, want.aspect_id);
        const std::string key = want.task_id + "/" + want.aspect_id;
        if (!got) {
            report.pass = false;
            report.diffs.push_back(key + ": missing from dataset");
            continue;
        }
        if (got->train != want.train) mismatch(key + " train", want.train, got->train);
        if (got->test != want.test) mismatch(key + " test", want.test, got->test);
    }
    for (const ManifestRow& got : actual.rows) {
        if (!expected.find(got.task_id, got.aspect_id)) {
            report.pass = false;
            report.diffs.push_back(got.task_id + "/" + got.aspect_id +
                                   ": not in expected manifest");
        }
    }
    if (actual.train_total() != expected.train_total()) {
        mismatch("train total", expected.train_total(), actual.train_total());
    }
    if (actual.test_total() != expected.test_total()) {
        mismatch("test total", expected.test_total(), actual.test_total());
    }
    return report;
}

std::vector<EvalInstance> mask_aspects(std::vector<EvalInstance> instances,
                                       const std::set<std::string>& masked_aspects) {
    std::erase_if(instances, [&](const EvalInstance& instance) {
        return instance.split == Split::Train &&
               masked_aspects.contains(instance.aspect_id);
    });
    return instances;
}

VerifiabilityChain verifiability_chain(std::span<const EvalInstance> instances,
                                       std::string_view extraction_aspect,
                                       std::string_view degree_aspect) {
    VerifiabilityChain chain;
    for (const EvalInstance& instance : instances) {
        if (instance.aspect_id == extraction_aspect) {
            chain.extraction.push_back(instance);
        } else if (instance.aspect_id == degree_aspect) {
            if (!instance.has_claims.has_value() || !*instance.has_claims) {
                throw std::invalid_argument(
                    "instance '" + instance.instance_id +
                    "': degree-of-verifiability instance lacks a claim-containing flag");
            }
            chain.degree.push_back(instance);
        }
    }
    return chain;
}

}  // namespace judgekit

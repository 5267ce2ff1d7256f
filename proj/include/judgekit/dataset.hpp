#pragma once

#include <filesystem>
#include <map>
#include <optional>
#include <set>
#include <span>
#include <stdexcept>
#include <string>
#include <string_view>
#include <vector>

namespace judgekit {

class AspectRegistry;

enum class Split { Train, Test };

const char* split_name(Split split);
Split split_from_string(std::string_view text);

/// One evaluation datum: the per-instance slot payloads, the gold score, and
/// its train/test assignment. `has_claims` carries the claim-containing flag
/// consumed by the verifiability chain.
struct EvalInstance {
    std::string instance_id;
    std::string task_id;
    std::string aspect_id;
    std::map<std::string, std::string> slots;
    double gold = 0.0;
    Split split = Split::Train;
    std::optional<bool> has_claims;
};

struct ManifestRow {
    std::string task_id;
    std::string aspect_id;
    long train = 0;
    long test = 0;
};

/// Per-(task, aspect) train/test counts with totals.
struct DatasetManifest {
    std::vector<ManifestRow> rows;

    long train_total() const;
    long test_total() const;
    long total() const { return train_total() + test_total(); }

    const ManifestRow* find(std::string_view task_id,
                            std::string_view aspect_id) const;
    ManifestRow& row_for(std::string_view task_id, std::string_view aspect_id);

    /// Counts after excluding the given aspects from training: their train
    /// counts drop to zero, test counts are untouched.
    DatasetManifest masked(const std::set<std::string>& masked_aspects) const;

    static DatasetManifest from_instances(std::span<const EvalInstance> instances);
};

/// Load/validation failure with the 1-based line it occurred on (0 when the
/// failure is not tied to a line).
class DatasetError : public std::runtime_error {
  public:
    DatasetError(long line, const std::string& message);
    long line() const { return line_; }

  private:
    long line_;
};

struct LoadedDataset {
    std::vector<EvalInstance> instances;
    DatasetManifest manifest;
};

/// Reads a line-delimited dataset file (one JSON record per line) and checks
/// every record against the registry: the (task, aspect) pair must be
/// registered, the gold score must be in the aspect's rubric, required slots
/// must be present and non-empty, and instance ids must be unique.
/// Throws DatasetError naming the offending line.
LoadedDataset load_dataset(const std::filesystem::path& path,
                           const AspectRegistry& registry);

/// Reads an expected-manifest file and checks its internal consistency
/// (declared totals must equal the sums of the rows).
DatasetManifest load_expected_manifest(const std::filesystem::path& path);

/// Row-by-row and total comparison of a computed manifest against an expected
/// one. Mismatches are report content, not errors.
struct ManifestValidation {
    bool pass = true;
    std::vector<std::string> diffs;

    std::string render() const;
};

ManifestValidation validate_manifest(const DatasetManifest& actual,
                                     const DatasetManifest& expected);

/// Drops train-split instances of the masked aspects; the test split is left
/// untouched so masked aspects remain evaluable as unseen.
std::vector<EvalInstance> mask_aspects(std::vector<EvalInstance> instances,
                                       const std::set<std::string>& masked_aspects);

/// The two-step verifiability sub-evaluation: binary claim detection over the
/// extraction aspect, then 1-5 scoring restricted to claim-containing
/// instances.
struct VerifiabilityChain {
    std::vector<EvalInstance> extraction;
    std::vector<EvalInstance> degree;
};

/// Splits instances into the extraction set (every extraction-aspect
/// instance) and the degree set (degree-aspect instances flagged as
/// claim-containing). A degree instance whose claim flag is absent or false
/// is an error: it has no claim-containing antecedent.
VerifiabilityChain verifiability_chain(
    std::span<const EvalInstance> instances,
    std::string_view extraction_aspect = "verifiability_ext",
    std::string_view degree_aspect = "verifiability");

}  // namespace judgekit

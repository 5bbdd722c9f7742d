#pragma once

// Gold-labeled session datasets: JSONL ingest, length classes, stratified
// sampling, stratified k-fold splitting.

#include <cstdint>
#include <filesystem>
#include <iosfwd>
#include <map>
#include <string>
#include <utility>
#include <vector>

#include "labelrefine/model.hpp"

namespace labelrefine {

struct LabeledDataset {
    std::vector<Session> sessions;
    GoldLabels gold;
    /// rater id -> session id -> labels; optional.
    std::map<std::string, GoldLabels> raters;

    std::size_t size() const { return sessions.size(); }
    const Session& session(const std::string& id) const;
    /// Keeps the listed sessions (in dataset order) with their gold and rater labels.
    LabeledDataset subset(const std::vector<std::string>& ids) const;
    std::vector<std::string> ids() const;

    bool operator==(const LabeledDataset&) const = default;
};

/// Parses the sessions JSONL format. Lines are 1-based in error messages.
LabeledDataset parse_dataset(std::istream& in);
LabeledDataset load_dataset(const std::filesystem::path& path);
void write_dataset(const LabeledDataset& d, std::ostream& out);
void save_dataset(const LabeledDataset& d, const std::filesystem::path& path);

enum class LengthClass { short_, medium, long_ };
std::string_view to_string(LengthClass c);

/// 1-4 exchanges short, 5-10 medium, 11+ long; each message counts once.
LengthClass length_class(const Session& s);

enum class StratumKey { length_class, topic_area, intent };
StratumKey parse_stratum_key(std::string_view s);

/// Sample of n sessions whose strata shares follow largest-remainder quotas.
LabeledDataset stratified_sample(const LabeledDataset& d, std::size_t n, const std::vector<StratumKey>& strata,
                                 std::uint64_t seed);

struct FoldAssignment {
    int k = 0;
    std::map<std::string, int> assignment;

    std::vector<std::size_t> fold_sizes() const;
    std::vector<std::string> fold_members(int fold) const;
    bool operator==(const FoldAssignment&) const = default;
};

/// Groups by the stratum keys (gold intent by default), shuffles each group
/// and deals round-robin, continuing where the previous group stopped.
FoldAssignment stratified_kfold(const LabeledDataset& d, int k, std::uint64_t seed,
                                const std::vector<StratumKey>& strata = {StratumKey::intent});

struct Split {
    LabeledDataset train;
    LabeledDataset test;
};

Split train_test_split(const LabeledDataset& d, const FoldAssignment& f, int test_fold);

}  // namespace labelrefine

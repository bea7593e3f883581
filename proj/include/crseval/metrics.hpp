#pragma once

#include <functional>
#include <map>
#include <string>
#include <vector>

#include <boost/rational.hpp>

#include "crseval/corpus.hpp"
#include "crseval/engine.hpp"

namespace crseval::metrics {

// Per-user fractions are accumulated exactly so parallel aggregation order
// can never change a reported number.
using Rational = boost::rational<long long>;

// The slice of a transcript the coverage metrics need.
struct UserSlates {
    std::string user_id;
    std::vector<std::vector<std::string>> slates; // slates[t-1] = P_t
    std::vector<std::string> targets;             // Y(u)
};

UserSlates user_slates_from(const engine::Transcript& transcript);
// Same slates scored against a substitute target set (bias subsets).
UserSlates user_slates_from(const engine::Transcript& transcript,
                            const std::vector<std::string>& targets);

// PC_t: mean over users of |(∪_{x≤t} P_x) ∩ Y| / |Y|. Users with fewer than
// t turns are excluded; `included` reports how many users entered the mean.
// t = 0 is defined as 0. Empty target sets are a hard error.
Rational pc_exact(const std::vector<UserSlates>& users, int t, size_t* included = nullptr);
double pc(const std::vector<UserSlates>& users, int t);

std::vector<Rational> pc_series_exact(const std::vector<UserSlates>& users, int max_t);
std::vector<double> pc_series(const std::vector<UserSlates>& users, int max_t);

// PCIR_t = PC_t − PC_{t−1}, with PC_0 = 0.
std::vector<Rational> pcir_exact(const std::vector<Rational>& pc_series);
std::vector<double> pcir(const std::vector<double>& pc_series);

enum class RecallNorm {
    targets,      // divide by |Y| (default)
    min_k_targets // divide by min(K, |Y|)
};

// Turn-local Recall@(t,K): mean over users of |P_t[:K] ∩ Y| / norm. Unlike
// PC it never accumulates, so repeated slates hold it flat. Users lacking
// turn t are a hard error naming them.
Rational recall_at_exact(const std::vector<UserSlates>& users, int t, int K,
                         RecallNorm norm = RecallNorm::targets);
double recall_at(const std::vector<UserSlates>& users, int t, int K,
                 RecallNorm norm = RecallNorm::targets);

struct PerTurnRow {
    int t = 0;
    double recall_at_K = 0.0;
    double pc = 0.0;
    double pcir = 0.0;
    size_t n_users = 0;
};

struct MetricsReport {
    std::vector<PerTurnRow> per_turn;
    size_t cohort_size = 0;   // transcripts considered
    size_t incomplete = 0;    // transcripts that ended before the longest run
    int K = 0;
    RecallNorm norm = RecallNorm::targets;
};

// Per-turn table over whatever turns exist; each turn averages the users
// that reached it (aborted users drop out of later rows, counted via
// n_users).
MetricsReport compute_report(const std::vector<engine::Transcript>& transcripts, int K,
                             RecallNorm norm = RecallNorm::targets);

struct BiasReport {
    std::vector<double> pc_selected; // index = t − 1
    std::vector<double> pc_residual;
    double gap = 0.0; // final-turn selected − residual
    size_t n_users = 0;
};

// PC computed twice with Y replaced by each bias subset. Requires biased
// transcripts whose subsets partition the target set.
BiasReport bias_decomposition(const std::vector<engine::Transcript>& transcripts);

enum class ProfileVariant { raw_reviews, binary_prefs, general_prefs };

const char* variant_name(ProfileVariant v);
ProfileVariant variant_from_name(const std::string& name);

struct PairwiseReport {
    ProfileVariant variant = ProfileVariant::general_prefs;
    size_t n_pairs = 0;
    size_t n_correct = 0;
    size_t n_ties_excluded = 0;
    double accuracy = 0.0;
};

// Decides between two candidate items given a profile text; returns 0 for
// the first, 1 for the second.
using PairSelector =
    std::function<int(const std::string& profile, const corpus::ItemRecord& a,
                      const corpus::ItemRecord& b)>;

// Every unordered pair of a user's rated targets with unequal ratings is
// shown to the selector (presentation order seeded); ties are counted and
// skipped. Zero eligible pairs is a hard error.
PairwiseReport pairwise_accuracy(const std::vector<corpus::UserRecord>& users,
                                 const std::vector<corpus::UserSplit>& splits,
                                 const corpus::Catalog& catalog, ProfileVariant variant,
                                 const std::map<std::string, std::string>& profile_by_user,
                                 const PairSelector& selector, uint64_t seed);

// Exact two-sided binomial sign test against p = 1/2; ignores zeros by
// taking only nonzero differences.
double sign_test_p_value(size_t n_positive, size_t n_nonzero);

// CSV emitters. Values are printed with enough digits to round-trip.
void write_per_turn_csv(const std::string& path, const MetricsReport& report);
void write_long_csv(const std::string& path, const std::string& run_label,
                    const MetricsReport& report);
void write_bias_csv(const std::string& path, const BiasReport& report);
void write_pairwise_csv(const std::string& path, const std::vector<PairwiseReport>& reports);

} // namespace crseval::metrics

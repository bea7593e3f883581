#include "crseval/metrics.hpp"

#include <algorithm>
#include <fstream>
#include <iomanip>
#include <set>
#include <sstream>

#include "crseval/errors.hpp"
#include "crseval/rng.hpp"

namespace crseval::metrics {

UserSlates user_slates_from(const engine::Transcript& transcript) {
    return user_slates_from(transcript, transcript.split.targets);
}

UserSlates user_slates_from(const engine::Transcript& transcript,
                            const std::vector<std::string>& targets) {
    UserSlates u;
    u.user_id = transcript.split.user_id;
    u.targets = targets;
    for (const auto& rec : transcript.turns) u.slates.push_back(rec.slate);
    return u;
}

namespace {

double to_double(const Rational& r) {
    return static_cast<double>(r.numerator()) / static_cast<double>(r.denominator());
}

Rational coverage_fraction(const std::set<std::string>& covered,
                           const std::vector<std::string>& targets) {
    std::set<std::string> target_set(targets.begin(), targets.end());
    long long hit = 0;
    for (const auto& id : target_set) hit += covered.count(id) ? 1 : 0;
    return Rational(hit, static_cast<long long>(target_set.size()));
}

std::string format_value(double v) {
    std::ostringstream out;
    out << std::setprecision(12) << v;
    return out.str();
}

std::ofstream open_csv(const std::string& path) {
    std::ofstream out(path, std::ios::trunc);
    if (!out) throw ConfigError("cannot write CSV: " + path);
    return out;
}

} // namespace

Rational pc_exact(const std::vector<UserSlates>& users, int t, size_t* included) {
    if (t < 0) throw ConfigError("PC is defined for t >= 0");
    if (included) *included = 0;
    if (t == 0) return Rational(0);

    Rational sum(0);
    size_t n = 0;
    for (const auto& u : users) {
        if (u.targets.empty()) {
            throw DataError("user " + u.user_id + " has an empty target set");
        }
        if (u.slates.size() < static_cast<size_t>(t)) continue; // aborted before t
        std::set<std::string> covered;
        for (int x = 0; x < t; ++x) {
            for (const auto& id : u.slates[x]) covered.insert(id);
        }
        sum += coverage_fraction(covered, u.targets);
        ++n;
    }
    if (included) *included = n;
    if (n == 0) return Rational(0);
    return sum / Rational(static_cast<long long>(n));
}

double pc(const std::vector<UserSlates>& users, int t) { return to_double(pc_exact(users, t)); }

std::vector<Rational> pc_series_exact(const std::vector<UserSlates>& users, int max_t) {
    std::vector<Rational> series;
    for (int t = 1; t <= max_t; ++t) series.push_back(pc_exact(users, t));
    return series;
}

std::vector<double> pc_series(const std::vector<UserSlates>& users, int max_t) {
    std::vector<double> series;
    for (const auto& r : pc_series_exact(users, max_t)) series.push_back(to_double(r));
    return series;
}

std::vector<Rational> pcir_exact(const std::vector<Rational>& pc_series) {
    std::vector<Rational> out;
    Rational prev(0);
    for (const auto& v : pc_series) {
        out.push_back(v - prev);
        prev = v;
    }
    return out;
}

std::vector<double> pcir(const std::vector<double>& series) {
    std::vector<double> out;
    double prev = 0.0;
    for (double v : series) {
        out.push_back(v - prev);
        prev = v;
    }
    return out;
}

Rational recall_at_exact(const std::vector<UserSlates>& users, int t, int K, RecallNorm norm) {
    if (t < 1) throw ConfigError("Recall@(t,K) is defined for t >= 1");
    if (K < 1) throw ConfigError("Recall@(t,K) needs K >= 1");

    std::string missing;
    for (const auto& u : users) {
        if (u.slates.size() < static_cast<size_t>(t)) {
            missing += missing.empty() ? u.user_id : ", " + u.user_id;
        }
    }
    if (!missing.empty()) {
        throw DataError("turn " + std::to_string(t) + " exceeds the dialogue of: " + missing);
    }
    if (users.empty()) throw DataError("recall over an empty cohort");

    Rational sum(0);
    for (const auto& u : users) {
        if (u.targets.empty()) {
            throw DataError("user " + u.user_id + " has an empty target set");
        }
        const auto& slate = u.slates[t - 1];
        if (slate.size() < static_cast<size_t>(K)) {
            throw DataError("slate at turn " + std::to_string(t) + " for user " + u.user_id +
                            " has " + std::to_string(slate.size()) + " items, needs " +
                            std::to_string(K));
        }
        std::set<std::string> target_set(u.targets.begin(), u.targets.end());
        std::set<std::string> top(slate.begin(), slate.begin() + K);
        long long hit = 0;
        for (const auto& id : top) hit += target_set.count(id) ? 1 : 0;
        long long denom = norm == RecallNorm::targets
                              ? static_cast<long long>(target_set.size())
                              : std::min<long long>(K, static_cast<long long>(target_set.size()));
        sum += Rational(hit, denom);
    }
    return sum / Rational(static_cast<long long>(users.size()));
}

double recall_at(const std::vector<UserSlates>& users, int t, int K, RecallNorm norm) {
    return to_double(recall_at_exact(users, t, K, norm));
}

MetricsReport compute_report(const std::vector<engine::Transcript>& transcripts, int K,
                             RecallNorm norm) {
    if (transcripts.empty()) throw DataError("no transcripts to evaluate");

    std::vector<UserSlates> users;
    size_t longest = 0;
    for (const auto& tr : transcripts) {
        users.push_back(user_slates_from(tr));
        longest = std::max(longest, users.back().slates.size());
    }

    MetricsReport report;
    report.cohort_size = transcripts.size();
    report.K = K;
    report.norm = norm;
    for (const auto& u : users) {
        if (u.slates.size() < longest) ++report.incomplete;
    }

    Rational prev_pc(0);
    for (int t = 1; t <= static_cast<int>(longest); ++t) {
        std::vector<UserSlates> reached;
        for (const auto& u : users) {
            if (u.slates.size() >= static_cast<size_t>(t)) reached.push_back(u);
        }
        size_t included = 0;
        Rational pc_t = pc_exact(users, t, &included);
        Rational recall_t = recall_at_exact(reached, t, K, norm);

        PerTurnRow row;
        row.t = t;
        row.recall_at_K = to_double(recall_t);
        row.pc = to_double(pc_t);
        row.pcir = to_double(pc_t - prev_pc);
        row.n_users = included;
        report.per_turn.push_back(row);
        prev_pc = pc_t;
    }
    return report;
}

BiasReport bias_decomposition(const std::vector<engine::Transcript>& transcripts) {
    if (transcripts.empty()) throw DataError("no transcripts for bias decomposition");

    std::vector<UserSlates> selected, residual;
    size_t turns = 0;
    for (const auto& tr : transcripts) {
        if (!tr.bias) {
            throw DataError("transcript for " + tr.split.user_id + " has no bias split");
        }
        std::set<std::string> sel(tr.bias->selected.begin(), tr.bias->selected.end());
        std::set<std::string> res(tr.bias->residual.begin(), tr.bias->residual.end());
        std::set<std::string> all(tr.split.targets.begin(), tr.split.targets.end());
        for (const auto& id : sel) {
            if (res.count(id)) throw DataError("bias subsets overlap on item " + id);
        }
        if (sel.size() + res.size() != all.size()) {
            throw DataError("bias subsets do not partition the target set for " +
                            tr.split.user_id);
        }
        for (const auto& id : all) {
            if (!sel.count(id) && !res.count(id)) {
                throw DataError("target " + id + " missing from both bias subsets");
            }
        }
        selected.push_back(user_slates_from(tr, tr.bias->selected));
        residual.push_back(user_slates_from(tr, tr.bias->residual));
        turns = std::max(turns, tr.turns.size());
    }

    BiasReport report;
    report.n_users = transcripts.size();
    report.pc_selected = pc_series(selected, static_cast<int>(turns));
    report.pc_residual = pc_series(residual, static_cast<int>(turns));
    if (turns > 0) {
        report.gap = report.pc_selected.back() - report.pc_residual.back();
    }
    return report;
}

const char* variant_name(ProfileVariant v) {
    switch (v) {
        case ProfileVariant::raw_reviews: return "raw_reviews";
        case ProfileVariant::binary_prefs: return "binary_prefs";
        case ProfileVariant::general_prefs: return "general_prefs";
    }
    return "unknown";
}

ProfileVariant variant_from_name(const std::string& name) {
    if (name == "raw_reviews") return ProfileVariant::raw_reviews;
    if (name == "binary_prefs") return ProfileVariant::binary_prefs;
    if (name == "general_prefs") return ProfileVariant::general_prefs;
    throw ConfigError("unknown profile variant: " + name);
}

PairwiseReport pairwise_accuracy(const std::vector<corpus::UserRecord>& users,
                                 const std::vector<corpus::UserSplit>& splits,
                                 const corpus::Catalog& catalog, ProfileVariant variant,
                                 const std::map<std::string, std::string>& profile_by_user,
                                 const PairSelector& selector, uint64_t seed) {
    std::map<std::string, const corpus::UserSplit*> split_by_user;
    for (const auto& s : splits) split_by_user[s.user_id] = &s;

    PairwiseReport report;
    report.variant = variant;

    for (const auto& user : users) {
        auto it = split_by_user.find(user.user_id);
        if (it == split_by_user.end()) throw DataError("no split for user " + user.user_id);
        auto pit = profile_by_user.find(user.user_id);
        if (pit == profile_by_user.end()) {
            throw DataError("no profile text for user " + user.user_id);
        }
        const auto& targets = it->second->targets;

        for (size_t i = 0; i < targets.size(); ++i) {
            for (size_t j = i + 1; j < targets.size(); ++j) {
                const auto* ia = user.find_interaction(targets[i]);
                const auto* ib = user.find_interaction(targets[j]);
                if (!ia || !ib) {
                    throw DataError("target pair without ratings for user " + user.user_id);
                }
                if (ia->rating == ib->rating) {
                    ++report.n_ties_excluded;
                    continue;
                }
                // Seeded presentation order so position bias cannot hide in
                // a fixed slot.
                SeededRng rng(derive_seed(seed, user.user_id + ":" + targets[i] + ":" + targets[j]));
                bool swap = rng.bounded(2) == 1;
                const auto& first = catalog.at(swap ? targets[j] : targets[i]);
                const auto& second = catalog.at(swap ? targets[i] : targets[j]);
                int first_rating = swap ? ib->rating : ia->rating;
                int second_rating = swap ? ia->rating : ib->rating;

                int choice = selector(pit->second, first, second);
                if (choice != 0 && choice != 1) {
                    throw DataError("selector returned " + std::to_string(choice) +
                                    ", expected 0 or 1");
                }
                int correct = first_rating > second_rating ? 0 : 1;
                ++report.n_pairs;
                if (choice == correct) ++report.n_correct;
            }
        }
    }

    if (report.n_pairs == 0) throw DataError("no pairs with unequal ratings to evaluate");
    report.accuracy = static_cast<double>(report.n_correct) / static_cast<double>(report.n_pairs);
    return report;
}

double sign_test_p_value(size_t n_positive, size_t n_nonzero) {
    if (n_positive > n_nonzero) throw DataError("positive count exceeds sample count");
    if (n_nonzero == 0) return 1.0;

    size_t n = n_nonzero;
    size_t m = std::min(n_positive, n - n_positive);

    // P(X <= m) for X ~ Binomial(n, 1/2), built by the recurrence
    // p_{i+1} = p_i * (n - i) / (i + 1).
    long double term = std::pow(0.5L, static_cast<long double>(n));
    long double tail = 0.0L;
    for (size_t i = 0; i <= m; ++i) {
        tail += term;
        term *= static_cast<long double>(n - i) / static_cast<long double>(i + 1);
    }
    long double p = 2.0L * tail;
    // The two tails overlap when n is even and m = n/2.
    if (p > 1.0L) p = 1.0L;
    return static_cast<double>(p);
}

void write_per_turn_csv(const std::string& path, const MetricsReport& report) {
    auto out = open_csv(path);
    out << "t,recall_at_K,pc,pcir,n_users\n";
    for (const auto& row : report.per_turn) {
        out << row.t << ',' << format_value(row.recall_at_K) << ',' << format_value(row.pc)
            << ',' << format_value(row.pcir) << ',' << row.n_users << '\n';
    }
}

void write_long_csv(const std::string& path, const std::string& run_label,
                    const MetricsReport& report) {
    auto out = open_csv(path);
    out << "run,metric,t,value\n";
    for (const auto& row : report.per_turn) {
        out << run_label << ",recall_at_K," << row.t << ',' << format_value(row.recall_at_K)
            << '\n';
        out << run_label << ",pc," << row.t << ',' << format_value(row.pc) << '\n';
        out << run_label << ",pcir," << row.t << ',' << format_value(row.pcir) << '\n';
    }
}

void write_bias_csv(const std::string& path, const BiasReport& report) {
    auto out = open_csv(path);
    out << "t,subset,pc,pcir,n_users\n";
    double prev_sel = 0.0, prev_res = 0.0;
    for (size_t i = 0; i < report.pc_selected.size(); ++i) {
        double sel = report.pc_selected[i];
        double res = i < report.pc_residual.size() ? report.pc_residual[i] : 0.0;
        out << (i + 1) << ",selected," << format_value(sel) << ','
            << format_value(sel - prev_sel) << ',' << report.n_users << '\n';
        out << (i + 1) << ",residual," << format_value(res) << ','
            << format_value(res - prev_res) << ',' << report.n_users << '\n';
        prev_sel = sel;
        prev_res = res;
    }
}

void write_pairwise_csv(const std::string& path, const std::vector<PairwiseReport>& reports) {
    auto out = open_csv(path);
    out << "variant,n_pairs,n_correct,n_ties_excluded,accuracy\n";
    for (const auto& r : reports) {
        out << variant_name(r.variant) << ',' << r.n_pairs << ',' << r.n_correct << ','
            << r.n_ties_excluded << ',' << format_value(r.accuracy) << '\n';
    }
}

} // namespace crseval::metrics

#include "neatboost/pipeline.hpp"

#include <algorithm>
#include <atomic>
#include <charconv>
#include <cmath>
#include <cstdio>
#include <exception>
#include <fstream>
#include <mutex>
#include <numeric>
#include <random>
#include <sstream>
#include <stdexcept>
#include <thread>

#include "neatboost/errors.hpp"
#include "neatboost/features.hpp"
#include "neatboost/random.hpp"

namespace neatboost {

namespace {

constexpr std::array<std::string_view, kNumClasses> kClassNames{"normal", "wb", "sm"};

std::vector<std::string> split_csv_line(const std::string& line) {
    std::vector<std::string> out;
    std::string cur;
    for (char c : line) {
        if (c == ',') {
            out.push_back(cur);
            cur.clear();
        } else if (c != '\r') {
            cur.push_back(c);
        }
    }
    out.push_back(cur);
    return out;
}

double parse_double(const std::string& s, std::size_t line_no) {
    double v = 0.0;
    const char* b = s.data();
    const char* e = s.data() + s.size();
    while (b < e && *b == ' ') ++b;
    auto [ptr, ec] = std::from_chars(b, e, v);
    if (ec != std::errc() || ptr != e) throw DataError("line " + std::to_string(line_no) + ": bad number '" + s + "'");
    return v;
}

std::vector<std::size_t> indices_of_class(std::span<const int> y, int c) {
    std::vector<std::size_t> out;
    for (std::size_t i = 0; i < y.size(); ++i)
        if (y[i] == c) out.push_back(i);
    return out;
}

int max_label(std::span<const int> y) {
    int m = -1;
    for (int v : y) m = std::max(m, v);
    return m;
}

}  // namespace

std::string_view class_name(int label) {
    if (label < 0 || label >= static_cast<int>(kNumClasses)) return "";
    return kClassNames[static_cast<std::size_t>(label)];
}

int parse_label(std::string_view name) {
    std::string lower(name);
    std::transform(lower.begin(), lower.end(), lower.begin(), [](unsigned char c) { return std::tolower(c); });
    if (lower.empty()) return kUnlabeled;
    for (std::size_t i = 0; i < kNumClasses; ++i)
        if (lower == kClassNames[i]) return static_cast<int>(i);
    throw DataError("unknown label '" + std::string(name) + "'");
}

bool Dataset::labeled() const {
    return std::none_of(y.begin(), y.end(), [](int v) { return v == kUnlabeled; });
}

void Dataset::validate(bool require_labels) const {
    if (x.rows() != y.size() || ids.size() != y.size()) throw DataError("dataset columns have inconsistent lengths");
    for (int v : y) {
        if (v == kUnlabeled && !require_labels) continue;
        if (v < 0 || v >= static_cast<int>(kNumClasses)) throw DataError("label out of range");
    }
    for (double v : x.data())
        if (!std::isfinite(v)) throw DataError("non-finite feature value");
}

Dataset Dataset::subset(std::span<const std::size_t> indices) const {
    Dataset out;
    out.x = x.select_rows(indices);
    for (std::size_t i : indices) {
        out.y.push_back(y[i]);
        out.ids.push_back(ids[i]);
    }
    return out;
}

std::vector<std::size_t> Dataset::class_counts(std::size_t n_classes) const {
    std::vector<std::size_t> counts(n_classes, 0);
    for (int v : y)
        if (v >= 0 && static_cast<std::size_t>(v) < n_classes) ++counts[static_cast<std::size_t>(v)];
    return counts;
}

Dataset read_dataset_csv(const std::filesystem::path& path, bool require_labels) {
    std::ifstream in(path);
    if (!in) throw DataError("cannot open " + path.string());
    std::string line;
    if (!std::getline(in, line)) throw DataError(path.string() + ": empty file");
    const auto header = split_csv_line(line);
    if (header.size() != 2 + kNumDescriptors || (header[0] != "id" && header[0] != "path") || header[1] != "label")
        throw DataError(path.string() + ": expected header id,label,f01..f16");
    for (std::size_t i = 0; i < kNumDescriptors; ++i)
        if (header[2 + i] != descriptor_column(i)) throw DataError(path.string() + ": unexpected column " + header[2 + i]);

    Dataset ds;
    ds.x = Matrix(0, kNumDescriptors);
    std::size_t line_no = 1;
    std::vector<double> row(kNumDescriptors);
    while (std::getline(in, line)) {
        ++line_no;
        if (line.empty() || line == "\r") continue;
        const auto cells = split_csv_line(line);
        if (cells.size() != header.size())
            throw DataError(path.string() + ": line " + std::to_string(line_no) + " has " +
                            std::to_string(cells.size()) + " fields");
        for (std::size_t i = 0; i < kNumDescriptors; ++i) row[i] = parse_double(cells[2 + i], line_no);
        ds.x.append_row(row);
        ds.y.push_back(parse_label(cells[1]));
        ds.ids.push_back(cells[0]);
    }
    ds.validate(require_labels);
    if (require_labels && !ds.labeled()) throw DataError(path.string() + ": unlabeled rows");
    return ds;
}

std::string format_double(double v) {
    char buf[32];
    std::snprintf(buf, sizeof buf, "%.17g", v);
    return buf;
}

std::string dataset_to_csv(const Dataset& ds) {
    std::ostringstream os;
    os << "id,label";
    for (std::size_t i = 0; i < kNumDescriptors; ++i) os << ',' << descriptor_column(i);
    os << '\n';
    for (std::size_t r = 0; r < ds.size(); ++r) {
        os << ds.ids[r] << ',' << class_name(ds.y[r]);
        for (double v : ds.x.row(r)) os << ',' << format_double(v);
        os << '\n';
    }
    return os.str();
}

void write_dataset_csv(const std::filesystem::path& path, const Dataset& ds) {
    std::ofstream out(path, std::ios::binary);
    if (!out) throw DataError("cannot write " + path.string());
    out << dataset_to_csv(ds);
}

SplitIndices stratified_split(std::span<const int> y, std::array<double, 3> fractions, std::uint64_t seed) {
    for (double f : fractions)
        if (!(f >= 0.0)) throw std::invalid_argument("split fractions must be nonnegative");
    if (std::abs(fractions[0] + fractions[1] + fractions[2] - 1.0) > 1e-9)
        throw std::invalid_argument("split fractions must sum to 1");

    SplitIndices out;
    std::array<std::vector<std::size_t>*, 3> parts{&out.train, &out.val, &out.test};
    const int classes = max_label(y) + 1;
    for (int c = 0; c < classes; ++c) {
        auto members = indices_of_class(y, c);
        if (members.empty()) continue;
        Rng rng(derive_seed(seed, "split", {static_cast<std::uint64_t>(c)}));
        std::shuffle(members.begin(), members.end(), rng);

        const double n = static_cast<double>(members.size());
        std::array<std::size_t, 3> counts{};
        std::array<double, 3> remainders{};
        std::size_t assigned = 0;
        for (std::size_t j = 0; j < 3; ++j) {
            const double quota = n * fractions[j];
            counts[j] = static_cast<std::size_t>(std::floor(quota));
            remainders[j] = quota - std::floor(quota);
            assigned += counts[j];
        }
        std::array<std::size_t, 3> order{0, 1, 2};
        std::stable_sort(order.begin(), order.end(), [&](std::size_t a, std::size_t b) { return remainders[a] > remainders[b]; });
        for (std::size_t k = 0; assigned < members.size(); ++k, ++assigned) ++counts[order[k % 3]];

        for (std::size_t j = 0; j < 3; ++j)
            if (fractions[j] > 0.0 && counts[j] == 0)
                throw DataError("class '" + std::string(class_name(c)) + "' has too few samples (" +
                                std::to_string(members.size()) + ") for the requested split");
        std::size_t pos = 0;
        for (std::size_t j = 0; j < 3; ++j)
            for (std::size_t k = 0; k < counts[j]; ++k) parts[j]->push_back(members[pos++]);
    }
    for (auto* p : parts) std::sort(p->begin(), p->end());
    return out;
}

std::vector<Fold> stratified_kfold(std::span<const int> y, std::size_t k, std::uint64_t seed) {
    if (k < 2) throw std::invalid_argument("K must be at least 2");
    const int classes = max_label(y) + 1;
    std::vector<std::vector<std::size_t>> val(k);
    std::size_t offset = 0;
    for (int c = 0; c < classes; ++c) {
        auto members = indices_of_class(y, c);
        if (members.empty()) continue;
        if (members.size() < k)
            throw DataError("class '" + std::string(class_name(c)) + "' has " + std::to_string(members.size()) +
                            " samples, fewer than K=" + std::to_string(k));
        Rng rng(derive_seed(seed, "kfold", {static_cast<std::uint64_t>(c)}));
        std::shuffle(members.begin(), members.end(), rng);
        for (std::size_t i = 0; i < members.size(); ++i) val[(offset + i) % k].push_back(members[i]);
        offset = (offset + members.size()) % k;
    }
    std::vector<Fold> folds(k);
    for (std::size_t f = 0; f < k; ++f) {
        std::sort(val[f].begin(), val[f].end());
        folds[f].val = val[f];
        std::vector<char> in_val(y.size(), 0);
        for (std::size_t i : val[f]) in_val[i] = 1;
        for (std::size_t i = 0; i < y.size(); ++i)
            if (!in_val[i]) folds[f].train.push_back(i);
    }
    return folds;
}

SmoteResult smote(const Matrix& x, std::span<const int> y, std::size_t k_neighbors, std::uint64_t seed) {
    if (x.rows() != y.size()) throw std::invalid_argument("label count does not match rows");
    if (k_neighbors < 1) throw std::invalid_argument("SMOTE needs k >= 1");
    SmoteResult out{x, std::vector<int>(y.begin(), y.end()), x.rows()};
    const int classes = max_label(y) + 1;
    std::size_t target = 0;
    for (int c = 0; c < classes; ++c) target = std::max(target, indices_of_class(y, c).size());

    std::vector<double> synth(x.cols());
    for (int c = 0; c < classes; ++c) {
        const auto members = indices_of_class(y, c);
        if (members.empty() || members.size() == target) continue;
        if (members.size() == 1)
            throw DataError("SMOTE: class '" + std::string(class_name(c)) + "' has a single sample");
        const std::size_t k_eff = std::min(k_neighbors, members.size() - 1);

        // nearest same-class neighbours, ties to the lower index
        std::vector<std::vector<std::size_t>> neighbors(members.size());
        for (std::size_t a = 0; a < members.size(); ++a) {
            std::vector<std::pair<double, std::size_t>> dist;
            for (std::size_t b = 0; b < members.size(); ++b) {
                if (a == b) continue;
                double d = 0.0;
                for (std::size_t f = 0; f < x.cols(); ++f) {
                    const double diff = x(members[a], f) - x(members[b], f);
                    d += diff * diff;
                }
                dist.emplace_back(d, members[b]);
            }
            std::partial_sort(dist.begin(), dist.begin() + static_cast<std::ptrdiff_t>(k_eff), dist.end());
            for (std::size_t j = 0; j < k_eff; ++j) neighbors[a].push_back(dist[j].second);
        }

        Rng rng(derive_seed(seed, "smote", {static_cast<std::uint64_t>(c)}));
        std::uniform_int_distribution<std::size_t> pick(0, k_eff - 1);
        std::uniform_real_distribution<double> unit(0.0, 1.0);
        for (std::size_t s = 0; s < target - members.size(); ++s) {
            const std::size_t a = s % members.size();
            const std::size_t base = members[a];
            const std::size_t nn = neighbors[a][pick(rng)];
            const double u = unit(rng);
            for (std::size_t f = 0; f < x.cols(); ++f) synth[f] = x(base, f) + u * (x(nn, f) - x(base, f));
            out.x.append_row(synth);
            out.y.push_back(c);
        }
    }
    return out;
}

MetricsReport compute_metrics(std::span<const int> y_true, std::span<const int> y_pred, std::size_t n_classes) {
    if (y_true.size() != y_pred.size()) throw std::invalid_argument("label vectors differ in length");
    if (y_true.empty()) throw std::invalid_argument("cannot compute metrics on empty input");
    MetricsReport r;
    r.confusion.assign(n_classes, std::vector<std::size_t>(n_classes, 0));
    for (std::size_t i = 0; i < y_true.size(); ++i) {
        const int t = y_true[i], p = y_pred[i];
        if (t < 0 || p < 0 || static_cast<std::size_t>(t) >= n_classes || static_cast<std::size_t>(p) >= n_classes)
            throw std::invalid_argument("label out of range");
        ++r.confusion[static_cast<std::size_t>(t)][static_cast<std::size_t>(p)];
    }
    const double n = static_cast<double>(y_true.size());
    std::size_t correct = 0;
    r.per_class.resize(n_classes);
    r.confusion_normalized.assign(n_classes, std::vector<double>(n_classes, 0.0));
    for (std::size_t c = 0; c < n_classes; ++c) {
        auto& m = r.per_class[c];
        const std::size_t tp = r.confusion[c][c];
        correct += tp;
        for (std::size_t o = 0; o < n_classes; ++o) {
            m.support += r.confusion[c][o];
            m.predicted += r.confusion[o][c];
        }
        if (m.predicted > 0) m.precision = static_cast<double>(tp) / static_cast<double>(m.predicted);
        if (m.support > 0) m.recall = static_cast<double>(tp) / static_cast<double>(m.support);
        m.undefined = m.predicted == 0 || m.support == 0;
        if (m.precision + m.recall > 0.0) m.f1 = 2.0 * m.precision * m.recall / (m.precision + m.recall);
        r.zero_division = r.zero_division || m.undefined;
        if (m.support > 0)
            for (std::size_t o = 0; o < n_classes; ++o)
                r.confusion_normalized[c][o] = static_cast<double>(r.confusion[c][o]) / static_cast<double>(m.support);
        const double w = static_cast<double>(m.support) / n;
        r.weighted_precision += w * m.precision;
        r.weighted_recall += w * m.recall;
        r.weighted_f1 += w * m.f1;
        r.macro_f1 += m.f1 / static_cast<double>(n_classes);
    }
    r.accuracy = static_cast<double>(correct) / n;
    return r;
}

nlohmann::json MetricsReport::to_json() const {
    nlohmann::json per = nlohmann::json::array();
    for (std::size_t c = 0; c < per_class.size(); ++c) {
        const auto& m = per_class[c];
        per.push_back({{"class", class_name(static_cast<int>(c))},
                       {"precision", m.precision},
                       {"recall", m.recall},
                       {"f1", m.f1},
                       {"support", m.support},
                       {"undefined", m.undefined}});
    }
    return {{"accuracy", accuracy},
            {"weighted_precision", weighted_precision},
            {"weighted_recall", weighted_recall},
            {"weighted_f1", weighted_f1},
            {"macro_f1", macro_f1},
            {"zero_division", zero_division},
            {"per_class", per},
            {"confusion", confusion},
            {"confusion_normalized", confusion_normalized}};
}

std::string MetricsReport::confusion_csv(bool normalized) const {
    std::ostringstream os;
    os << "true\\pred";
    for (std::size_t c = 0; c < confusion.size(); ++c) os << ',' << class_name(static_cast<int>(c));
    os << '\n';
    for (std::size_t t = 0; t < confusion.size(); ++t) {
        os << class_name(static_cast<int>(t));
        for (std::size_t p = 0; p < confusion.size(); ++p) {
            os << ',';
            if (normalized)
                os << format_double(confusion_normalized[t][p]);
            else
                os << confusion[t][p];
        }
        os << '\n';
    }
    return os.str();
}

Dataset synthesize_dataset(std::size_t n_per_class, double separation, std::uint64_t seed) {
    if (n_per_class < 1) throw std::invalid_argument("n_per_class must be >= 1");
    if (!(separation >= 0.0)) throw std::invalid_argument("separation must be >= 0");

    // base means and spreads per descriptor, roughly the scale of real
    // measurements on a 1024 px image
    constexpr std::array<double, kNumDescriptors> mean{0.08, 0.06, 0.004, 0.003, 0.12, 9000.0, 0.22, 0.18,
                                                       0.2,  0.18, 0.22,  0.015, 0.012, 0.015, 0.012, 0.25};
    constexpr std::array<double, kNumDescriptors> sd{0.01, 0.008, 0.0005, 0.0004, 0.02, 1500.0, 0.02, 0.02,
                                                     0.02, 0.02,  0.02,   0.002,  0.002, 0.002, 0.002, 0.04};
    constexpr std::array<bool, kNumDescriptors> fraction{false, false, false, false, true, false, true, true,
                                                         true,  true,  true,  false, false, false, false, true};
    constexpr std::size_t kDense = 15, kLocalVar = 2, kHistBin5 = 10;

    std::array<std::array<double, kNumDescriptors>, kNumClasses> shift{};
    shift[1][kDense] = separation;
    shift[1][kLocalVar] = separation;
    shift[2][kDense] = separation / 2.0;
    shift[2][kLocalVar] = separation / 2.0;
    shift[2][kHistBin5] = separation;

    Rng rng(derive_seed(seed, "synth"));
    std::normal_distribution<double> normal(0.0, 1.0);
    Dataset ds;
    ds.x = Matrix(0, kNumDescriptors);
    std::vector<double> row(kNumDescriptors);
    for (std::size_t c = 0; c < kNumClasses; ++c) {
        for (std::size_t i = 0; i < n_per_class; ++i) {
            for (std::size_t f = 0; f < kNumDescriptors; ++f) {
                double v = mean[f] + sd[f] * (shift[c][f] + normal(rng));
                v = std::max(v, 0.0);
                if (fraction[f]) v = std::min(v, 1.0);
                row[f] = v;
            }
            ds.x.append_row(row);
            ds.y.push_back(static_cast<int>(c));
            char id[48];
            std::snprintf(id, sizeof id, "syn-%s-%04zu", std::string(class_name(static_cast<int>(c))).c_str(), i);
            ds.ids.emplace_back(id);
        }
    }
    return ds;
}

std::vector<int> argmax_rows(const Matrix& probs) {
    std::vector<int> out(probs.rows());
    for (std::size_t r = 0; r < probs.rows(); ++r) {
        const auto row = probs.row(r);
        out[r] = static_cast<int>(std::max_element(row.begin(), row.end()) - row.begin());
    }
    return out;
}

Matrix out_of_fold_predictions(const Matrix& x, std::span<const int> y, const std::vector<Fold>& folds,
                               std::size_t n_classes, std::size_t smote_k, std::uint64_t seed, const FitPredict& fit,
                               std::size_t jobs) {
    Matrix oof(x.rows(), n_classes, 0.0);
    std::vector<char> filled(x.rows(), 0);
    for (const auto& f : folds)
        for (std::size_t i : f.val) {
            if (filled[i]) throw std::invalid_argument("validation folds overlap");
            filled[i] = 1;
        }
    if (std::find(filled.begin(), filled.end(), 0) != filled.end())
        throw std::invalid_argument("validation folds do not cover every sample");

    std::vector<std::exception_ptr> errors(folds.size());
    std::atomic<std::size_t> cursor{0};
    auto worker = [&] {
        for (std::size_t f = cursor++; f < folds.size(); f = cursor++) {
            try {
                const Matrix xtr = x.select_rows(folds[f].train);
                std::vector<int> ytr;
                for (std::size_t i : folds[f].train) ytr.push_back(y[i]);
                const auto balanced = smote(xtr, ytr, smote_k, derive_seed(seed, "fold.smote", {f}));
                const Matrix xval = x.select_rows(folds[f].val);
                const Matrix p = fit(balanced.x, balanced.y, xval, f);
                if (p.rows() != xval.rows() || p.cols() != n_classes)
                    throw std::logic_error("fold model returned a probability matrix of the wrong shape");
                for (std::size_t r = 0; r < folds[f].val.size(); ++r)
                    for (std::size_t c = 0; c < n_classes; ++c) oof(folds[f].val[r], c) = p(r, c);
            } catch (...) {
                errors[f] = std::current_exception();
            }
        }
    };
    const std::size_t n_threads = std::max<std::size_t>(1, std::min(jobs, folds.size()));
    if (n_threads == 1) {
        worker();
    } else {
        std::vector<std::jthread> pool;
        for (std::size_t t = 0; t < n_threads; ++t) pool.emplace_back(worker);
    }
    for (auto& e : errors)
        if (e) std::rethrow_exception(e);
    return oof;
}

}  // namespace neatboost

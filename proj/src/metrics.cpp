#include "snet/metrics.hpp"

#include <algorithm>
#include <cmath>
#include <cstdlib>
#include <iomanip>
#include <sstream>
#include <stdexcept>
#include <unordered_map>

namespace snet {

int lcs_length(const TokenList& a, const TokenList& b) {
  if (a.empty() || b.empty()) return 0;
  std::vector<int> prev(b.size() + 1, 0), cur(b.size() + 1, 0);
  for (size_t i = 1; i <= a.size(); ++i) {
    for (size_t j = 1; j <= b.size(); ++j) {
      if (a[i - 1] == b[j - 1])
        cur[j] = prev[j - 1] + 1;
      else
        cur[j] = std::max(prev[j], cur[j - 1]);
    }
    std::swap(prev, cur);
  }
  return prev[b.size()];
}

double rouge_l(const TokenList& hypothesis,
               const std::vector<TokenList>& references, double beta) {
  if (references.empty())
    throw std::invalid_argument("rouge_l: at least one reference required");
  if (hypothesis.empty()) return 0.0;
  double best = 0.0;
  for (const TokenList& ref : references) {
    if (ref.empty()) continue;
    const double lcs = lcs_length(hypothesis, ref);
    const double p = lcs / hypothesis.size();
    const double r = lcs / ref.size();
    double f = 0.0;
    if (p > 0.0 || r > 0.0)
      f = (1.0 + beta * beta) * p * r / (r + beta * beta * p);
    best = std::max(best, f);
  }
  return best;
}

double bleu_1_corpus(
    const std::vector<std::pair<TokenList, std::vector<TokenList>>>& pairs) {
  if (pairs.empty())
    throw std::invalid_argument("bleu_1_corpus: empty corpus");
  long long matched = 0, total = 0, hyp_len = 0, ref_len = 0;
  for (const auto& [hyp, refs] : pairs) {
    std::unordered_map<std::string, int> hyp_counts;
    for (const auto& t : hyp) ++hyp_counts[t];
    // clip against the max reference count per token
    std::unordered_map<std::string, int> max_ref;
    for (const auto& ref : refs) {
      std::unordered_map<std::string, int> c;
      for (const auto& t : ref) ++c[t];
      for (const auto& [t, n] : c) max_ref[t] = std::max(max_ref[t], n);
    }
    for (const auto& [t, n] : hyp_counts) {
      auto it = max_ref.find(t);
      matched += std::min(n, it == max_ref.end() ? 0 : it->second);
    }
    total += static_cast<long long>(hyp.size());
    hyp_len += static_cast<long long>(hyp.size());
    // closest reference length, shorter wins ties
    long long best = 0, best_diff = -1;
    for (const auto& ref : refs) {
      long long d = std::llabs(static_cast<long long>(ref.size()) -
                               static_cast<long long>(hyp.size()));
      if (best_diff < 0 || d < best_diff ||
          (d == best_diff && static_cast<long long>(ref.size()) < best)) {
        best_diff = d;
        best = static_cast<long long>(ref.size());
      }
    }
    ref_len += best;
  }
  if (total == 0) return 0.0;
  const double precision = static_cast<double>(matched) / total;
  double bp = 1.0;
  if (hyp_len < ref_len && hyp_len > 0)
    bp = std::exp(1.0 - static_cast<double>(ref_len) / hyp_len);
  return bp * precision;
}

double precision_at_1(
    const std::vector<std::pair<std::vector<double>, int>>& rankings) {
  if (rankings.empty()) return 0.0;
  int hits = 0;
  for (const auto& [scores, correct] : rankings) {
    if (scores.empty() || correct < 0 ||
        correct >= static_cast<int>(scores.size()))
      throw std::invalid_argument("precision_at_1: bad ranking entry");
    int arg = 0;
    for (size_t i = 1; i < scores.size(); ++i)
      if (scores[i] > scores[arg]) arg = static_cast<int>(i);
    if (arg == correct) ++hits;
  }
  return static_cast<double>(hits) / rankings.size();
}

static int bucket_index(double oracle) {
  if (oracle >= 1.0) return 0;
  if (oracle >= 0.8) return 1;
  if (oracle >= 0.6) return 2;
  if (oracle >= 0.4) return 3;
  if (oracle >= 0.2) return 4;
  return 5;
}

std::vector<BucketRow> bucket_by_upper_bound(
    const std::vector<double>& oracle_scores,
    const std::vector<double>& eval_scores) {
  if (oracle_scores.size() != eval_scores.size())
    throw std::invalid_argument("bucket_by_upper_bound: length mismatch");
  static const char* kLabels[6] = {"max = 1.0",     "0.8 <= max < 1.0",
                                   "0.6 <= max < 0.8", "0.4 <= max < 0.6",
                                   "0.2 <= max < 0.4", "max < 0.2"};
  std::vector<BucketRow> rows(6);
  for (int i = 0; i < 6; ++i) rows[i].label = kLabels[i];
  for (size_t i = 0; i < oracle_scores.size(); ++i) {
    BucketRow& row = rows[bucket_index(oracle_scores[i])];
    ++row.count;
    row.mean_rouge += eval_scores[i];
  }
  const double n = static_cast<double>(oracle_scores.size());
  for (BucketRow& row : rows) {
    if (row.count > 0) row.mean_rouge /= row.count;
    row.fraction = n > 0 ? row.count / n : 0.0;
  }
  return rows;
}

std::string format_report_table(const EvalReport& report) {
  std::ostringstream os;
  os << std::fixed << std::setprecision(4);
  os << "metric        value\n";
  os << "rouge_l       " << report.rouge_l_mean << "\n";
  os << "bleu_1        " << report.bleu_1 << "\n";
  if (report.p_at_1 >= 0.0) os << "p_at_1        " << report.p_at_1 << "\n";
  os << "\nbucket              fraction  mean_rouge  count\n";
  for (const BucketRow& row : report.bucket_table) {
    os << std::left << std::setw(20) << row.label << std::right
       << std::setw(8) << row.fraction << "  " << std::setw(10)
       << row.mean_rouge << "  " << std::setw(5) << row.count << "\n";
  }
  return os.str();
}

}  // namespace snet

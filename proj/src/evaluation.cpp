#include "scenegen/evaluation.hpp"

#include <algorithm>
#include <cmath>
#include <iomanip>
#include <numeric>
#include <regex>
#include <sstream>

namespace scenegen::eval {

std::string ScriptedMLLM::ask(const ImageU8& image, const std::string& context,
                              const std::string& question) {
  (void)image;
  (void)context;
  std::lock_guard<std::mutex> lock(mu_);
  questions_.push_back(question);
  if (responses_.empty()) throw EvaluationError("scripted client has no responses");
  const std::size_t idx = std::min(next_, responses_.size() - 1);
  ++next_;
  return responses_[idx];
}

std::vector<std::string> ScriptedMLLM::questions() const {
  std::lock_guard<std::mutex> lock(mu_);
  return questions_;
}

int ScriptedMLLM::calls() const {
  std::lock_guard<std::mutex> lock(mu_);
  return static_cast<int>(questions_.size());
}

std::optional<double> last_number(const std::string& text) {
  static const std::regex kNumber(R"([-+]?[0-9]+(\.[0-9]+)?)");
  std::optional<double> found;
  for (auto it = std::sregex_iterator(text.begin(), text.end(), kNumber);
       it != std::sregex_iterator(); ++it) {
    found = std::stod(it->str());
  }
  return found;
}

ScoreOutcome gpt4score(const ImageU8& image, const std::string& prompt, MLLMClient& mllm) {
  ScoreOutcome out;
  out.description = mllm.ask(image, prompt, kDescribeQuestion);
  for (int attempt = 0; attempt < 3; ++attempt) {
    const std::string reply = mllm.ask(image, prompt, kScoreQuestion);
    out.attempts = attempt + 1;
    const auto value = last_number(reply);
    if (!value) continue;
    double raw = *value;
    if (raw < 0.0 || raw > 100.0) {
      raw = std::clamp(raw, 0.0, 100.0);
      out.clamped = true;
    }
    out.score = raw / 100.0;
    return out;
  }
  throw EvaluationError("no numeric score in reply after retries");
}

double gpt4clip_score(const ImageU8& image, const std::string& prompt, MLLMClient& mllm,
                      saa::TextEncoder& encoder) {
  const std::string caption = mllm.ask(image, prompt, kDescribeQuestion);
  if (trim(caption).empty()) throw EvaluationError("empty caption from describe question");
  return saa::cosine_similarity(encoder.encode(caption), encoder.encode(prompt));
}

double normalize_human_score(int raw) {
  if (raw < 1 || raw > 5) throw ArgumentError("human score must be in 1..5");
  return raw / 5.0;
}

namespace {

void check_sample(const RankedSample& sample) {
  if (sample.metric.size() != sample.human.size())
    throw ArgumentError("ranked sample lists differ in length");
  if (sample.metric.size() < 2) throw ArgumentError("ranked sample needs at least two entries");
}

}  // namespace

double kendall_tau(const RankedSample& sample) {
  check_sample(sample);
  const int n = static_cast<int>(sample.metric.size());
  long long concordant = 0, discordant = 0, tied_x = 0, tied_y = 0;
  for (int i = 0; i < n; ++i) {
    for (int j = i + 1; j < n; ++j) {
      const double dx = sample.metric[static_cast<std::size_t>(i)] - sample.metric[static_cast<std::size_t>(j)];
      const double dy = sample.human[static_cast<std::size_t>(i)] - sample.human[static_cast<std::size_t>(j)];
      if (dx == 0.0 && dy == 0.0) continue;  // tied in both: excluded from every term
      if (dx == 0.0)
        ++tied_x;
      else if (dy == 0.0)
        ++tied_y;
      else if ((dx > 0.0) == (dy > 0.0))
        ++concordant;
      else
        ++discordant;
    }
  }
  const double den_x = static_cast<double>(concordant + discordant + tied_x);
  const double den_y = static_cast<double>(concordant + discordant + tied_y);
  if (den_x == 0.0 || den_y == 0.0)
    throw DegenerateSampleError("rank correlation undefined for a constant list");
  return static_cast<double>(concordant - discordant) / std::sqrt(den_x * den_y);
}

std::vector<double> average_ranks(const std::vector<double>& values) {
  const std::size_t n = values.size();
  std::vector<std::size_t> order(n);
  std::iota(order.begin(), order.end(), 0);
  std::stable_sort(order.begin(), order.end(),
                   [&](std::size_t a, std::size_t b) { return values[a] < values[b]; });
  std::vector<double> ranks(n, 0.0);
  std::size_t i = 0;
  while (i < n) {
    std::size_t j = i;
    while (j + 1 < n && values[order[j + 1]] == values[order[i]]) ++j;
    const double avg = (static_cast<double>(i) + static_cast<double>(j)) / 2.0 + 1.0;
    for (std::size_t k = i; k <= j; ++k) ranks[order[k]] = avg;
    i = j + 1;
  }
  return ranks;
}

double spearman_rho(const RankedSample& sample) {
  check_sample(sample);
  const auto rx = average_ranks(sample.metric);
  const auto ry = average_ranks(sample.human);
  const std::size_t n = rx.size();
  double mx = 0.0, my = 0.0;
  for (std::size_t i = 0; i < n; ++i) {
    mx += rx[i];
    my += ry[i];
  }
  mx /= static_cast<double>(n);
  my /= static_cast<double>(n);
  double sxy = 0.0, sxx = 0.0, syy = 0.0;
  for (std::size_t i = 0; i < n; ++i) {
    sxy += (rx[i] - mx) * (ry[i] - my);
    sxx += (rx[i] - mx) * (rx[i] - mx);
    syy += (ry[i] - my) * (ry[i] - my);
  }
  if (sxx == 0.0 || syy == 0.0)
    throw DegenerateSampleError("rank correlation undefined for a constant list");
  return sxy / std::sqrt(sxx * syy);
}

Report aggregate_report(const std::vector<ScoreRecord>& records) {
  struct Group {
    std::string method, metric;
    double ra_sum = 0.0;
    int ra_count = 0;
    double ci_sum = 0.0;
    int ci_count = 0;
  };
  std::vector<Group> groups;
  auto find_group = [&](const ScoreRecord& r) -> Group& {
    for (auto& g : groups) {
      if (g.method == r.method && g.metric == r.metric) return g;
    }
    groups.push_back(Group{r.method, r.metric, 0.0, 0, 0.0, 0});
    return groups.back();
  };
  for (const auto& r : records) {
    Group& g = find_group(r);
    if (r.category == kCategoryRealistic) {
      g.ra_sum += r.value;
      ++g.ra_count;
    } else if (r.category == kCategoryCreative) {
      g.ci_sum += r.value;
      ++g.ci_count;
    } else {
      throw ArgumentError("unknown category '" + r.category + "'");
    }
  }

  Report report;
  for (const auto& g : groups) {
    double mean_sum = 0.0;
    int mean_count = 0;
    if (g.ra_count > 0) {
      const double mean = g.ra_sum / g.ra_count;
      report.rows.push_back({g.method, g.metric, kCategoryRealistic, mean, g.ra_count});
      mean_sum += mean;
      ++mean_count;
    }
    if (g.ci_count > 0) {
      const double mean = g.ci_sum / g.ci_count;
      report.rows.push_back({g.method, g.metric, kCategoryCreative, mean, g.ci_count});
      mean_sum += mean;
      ++mean_count;
    }
    if (mean_count > 0) {
      report.rows.push_back({g.method, g.metric, "average", mean_sum / mean_count, mean_count});
    }
  }
  return report;
}

std::string Report::to_csv() const {
  std::ostringstream os;
  os << "method,metric,category,mean,count\n";
  os << std::setprecision(17);
  for (const auto& row : rows) {
    os << row.method << ',' << row.metric << ',' << row.category << ',' << row.mean << ','
       << row.count << '\n';
  }
  return os.str();
}

std::string Report::to_table() const {
  std::size_t method_w = 6, metric_w = 6, category_w = 8;
  for (const auto& row : rows) {
    method_w = std::max(method_w, row.method.size());
    metric_w = std::max(metric_w, row.metric.size());
    category_w = std::max(category_w, row.category.size());
  }
  std::ostringstream os;
  os << std::left << std::setw(static_cast<int>(method_w) + 2) << "method"
     << std::setw(static_cast<int>(metric_w) + 2) << "metric"
     << std::setw(static_cast<int>(category_w) + 2) << "category" << std::right << std::setw(8)
     << "mean" << std::setw(7) << "count" << '\n';
  for (const auto& row : rows) {
    os << std::left << std::setw(static_cast<int>(method_w) + 2) << row.method
       << std::setw(static_cast<int>(metric_w) + 2) << row.metric
       << std::setw(static_cast<int>(category_w) + 2) << row.category << std::right
       << std::setw(8) << std::fixed << std::setprecision(3) << row.mean << std::setw(7)
       << row.count << '\n';
  }
  return os.str();
}

}  // namespace scenegen::eval

#pragma once

#include <algorithm>
#include <atomic>
#include <cstddef>
#include <exception>
#include <filesystem>
#include <functional>
#include <string>
#include <thread>
#include <vector>

namespace kpo {

/// Numeric table with a header row; column names carry their unit suffix.
struct Table {
  std::vector<std::string> header;
  std::vector<std::vector<double>> rows;

  std::size_t column(const std::string& name) const;
  std::vector<double> values(const std::string& name) const;
};

/// Round-trip exact (%.17g), "inf"/"nan" for non-finite cells.
void write_csv(const std::filesystem::path& path, const Table& table);
Table read_csv(const std::filesystem::path& path);

struct PlotSpec {
  std::string title;
  std::string x;
  std::vector<std::string> y;
  bool log_x = false;
  bool log_y = false;
};

/// Standalone SVG line plot of the selected columns.
std::string render_svg(const Table& table, const PlotSpec& spec);

/// Runs f(0..n-1) on up to `workers` threads; results are stored by index so
/// the output never depends on scheduling. The lowest-index exception wins.
template <typename R>
std::vector<R> parallel_map(std::size_t n, int workers, const std::function<R(std::size_t)>& f) {
  std::vector<R> out(n);
  std::vector<std::exception_ptr> errors(n);
  std::atomic<std::size_t> next{0};
  auto loop = [&] {
    for (std::size_t i = next++; i < n; i = next++) {
      try {
        out[i] = f(i);
      } catch (...) {
        errors[i] = std::current_exception();
      }
    }
  };
  const std::size_t threads = std::clamp<std::size_t>(workers > 0 ? workers : 1, 1, std::max<std::size_t>(n, 1));
  if (threads == 1) {
    loop();
  } else {
    std::vector<std::jthread> pool;
    for (std::size_t t = 0; t < threads; ++t) pool.emplace_back(loop);
  }
  for (auto& e : errors)
    if (e) std::rethrow_exception(e);
  return out;
}

}  // namespace kpo

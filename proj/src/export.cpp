#include "gpswarm/export.hpp"

#include <algorithm>
#include <cmath>
#include <fstream>
#include <sstream>
#include <stdexcept>

namespace gpswarm {

void write_pgm(const std::filesystem::path& path, std::span<const double> values, int rows, int cols) {
  if (values.size() != static_cast<std::size_t>(rows) * cols)
    throw std::invalid_argument("pgm size mismatch");
  const auto [lo_it, hi_it] = std::minmax_element(values.begin(), values.end());
  const double lo = values.empty() ? 0.0 : *lo_it;
  const double hi = values.empty() ? 0.0 : *hi_it;
  const double span = hi - lo;

  std::ofstream out(path, std::ios::binary);
  if (!out) throw std::runtime_error("cannot write " + path.string());
  out << "P5\n" << cols << " " << rows << "\n255\n";
  for (int r = rows - 1; r >= 0; --r) {
    for (int c = 0; c < cols; ++c) {
      const double v = values[static_cast<std::size_t>(r) * cols + c];
      const double t = span > 0.0 ? (v - lo) / span : 0.0;
      out.put(static_cast<char>(static_cast<unsigned char>(std::lround(t * 255.0))));
    }
  }
  if (!out) throw std::runtime_error("write failed: " + path.string());

  std::ofstream side(path.string() + ".txt");
  side.precision(17);
  side << "min " << lo << "\nmax " << hi << "\n";
  if (!side) throw std::runtime_error("write failed: " + path.string() + ".txt");
}

void write_trace_csv(std::ostream& out, const EpisodeTrace& trace) {
  if (trace.steps.empty()) return;
  const auto& first = trace.steps.front();
  out << "k,reward,collision_aa,collision_ao";
  for (std::size_t i = 0; i < first.agent_pos.size(); ++i)
    out << ",x" << i << ",y" << i << ",vx" << i << ",vy" << i;
  for (std::size_t m = 0; m < first.info.target_distances.size(); ++m) out << ",d" << m;
  out << "\n";
  out.precision(17);
  for (const auto& s : trace.steps) {
    out << s.k << "," << s.reward << "," << int(s.info.collision_aa) << "," << int(s.info.collision_ao);
    for (std::size_t i = 0; i < s.agent_pos.size(); ++i)
      out << "," << s.agent_pos[i].x() << "," << s.agent_pos[i].y() << "," << s.agent_vel[i].x()
          << "," << s.agent_vel[i].y();
    for (double d : s.info.target_distances) out << "," << d;
    out << "\n";
  }
}

std::string metrics_csv_row(const std::string& config, const std::string& policy, int episodes,
                            const Metrics& m) {
  std::ostringstream os;
  os.precision(6);
  os << std::fixed << config << "," << policy << "," << episodes << "," << m.r_avg << ","
     << m.d_final << "," << m.cr_aa << "," << m.cr_ao;
  return os.str();
}

}  // namespace gpswarm

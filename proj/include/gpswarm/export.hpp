#pragma once

#include <filesystem>
#include <ostream>
#include <span>
#include <string>

#include "gpswarm/swarm_env.hpp"

namespace gpswarm {

/// 8-bit binary PGM, linearly scaled between the data min and max. The
/// range goes to a sidecar `<path>.txt` ("min <v>\nmax <v>\n"). Raster row
/// 0 (bottom of the workspace) is written last so the image is y-up.
void write_pgm(const std::filesystem::path& path, std::span<const double> values, int rows, int cols);

/// Header: k,reward,collision_aa,collision_ao,x0,y0,vx0,vy0,...,d0,d1,...
void write_trace_csv(std::ostream& out, const EpisodeTrace& trace);

inline constexpr const char* kMetricsCsvHeader = "config,policy,episodes,r_avg,d_final,cr_aa,cr_ao";
std::string metrics_csv_row(const std::string& config, const std::string& policy, int episodes,
                            const Metrics& m);

}  // namespace gpswarm

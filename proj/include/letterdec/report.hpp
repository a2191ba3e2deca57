#pragma once

#include <string>
#include <vector>

#include "letterdec/analysis.hpp"
#include "letterdec/harness.hpp"

namespace letterdec {

// 8-bit binary PGM (P5), one matrix cell upscaled to a scale x scale block,
// values mapped linearly from [lo, hi] to [0, 255] with clamping and
// round-half-up.
void render_heatmap(const SimilarityMatrix& m, const std::string& path, double lo = 0.0, double hi = 1.0,
                    int scale = 16);

// Byte-level PGM mapping used by render_heatmap, exposed for tests.
unsigned char heatmap_pixel(double value, double lo, double hi);

void write_similarity_csv(const SimilarityMatrix& m, const std::string& path);
void write_matrix_csv(const std::vector<std::vector<double>>& m, const std::vector<std::string>& row_labels,
                      const std::vector<std::string>& col_labels, const std::string& path);

std::string run_report_to_json(const RunReport& report);
RunReport run_report_from_json(const std::string& json_text);

// Table-1-style maxima (models x subject) and the per-fold table.
void write_run_report_files(const RunReport& report, const std::string& out_dir);

std::string format_double(double v);

}  // namespace letterdec

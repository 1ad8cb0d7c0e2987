#pragma once

#include <cstdint>
#include <string>
#include <string_view>
#include <vector>

#include <Eigen/Dense>

#include "flat/sdq.hpp"
#include "flat/simulation.hpp"
#include "flat/spatial.hpp"

namespace flat {

// CSV layouts. Ids are 0..n-1 in any order; rows are returned sorted by id.
//   dataset:      id,x1,x2[,x3],<covariates...>,<response>
//   coefficients: id,x1,x2[,x3],beta_1..beta_p[,region_1..region_p]
//   labels:       id,label   or   id,label_1..label_p
//   sdq:          id,x1,x2[,x3],sdq

SpatialDataset read_dataset_csv(const std::string& path);
void write_dataset_csv(const SpatialDataset& ds, const std::string& path);

struct FieldTable {
    Eigen::MatrixXd coords;
    CoefficientField field;
    /// Optional region_k columns, one vector per coefficient.
    std::vector<std::vector<int>> regions;
};

FieldTable read_field_csv(const std::string& path);
void write_field_csv(const FieldTable& table, const std::string& path);

void write_labels_csv(const std::vector<std::vector<int>>& columns,
                      const std::vector<std::string>& names, const std::string& path);

void write_sdq_csv(const Eigen::MatrixXd& coords, const SdqField& sdq, const std::string& path);

/// measure,coordinate,method,value rows in table order.
std::string metric_table_csv(const MetricTable& table);

/// Shortest text that reads back to the same double; "nan", "inf", "-inf"
/// for non-finite values.
std::string format_double(double value);

std::uint64_t fnv1a64(std::string_view bytes);
std::string hex64(std::uint64_t value);

std::string read_text_file(const std::string& path);
void write_text_file(const std::string& path, const std::string& content);

}  // namespace flat

#pragma once

#include <string>
#include <vector>

#include <Eigen/Dense>

namespace econdeepc {

// Shortest round-trip-exact decimal form of a double ("%.17g" retried at
// shorter precision); keeps text artifacts readable and byte-stable.
std::string format_double(double v);

double parse_double(const std::string& s, const std::string& context);
long long parse_int(const std::string& s, const std::string& context);

std::vector<std::string> split_fields(const std::string& line, char sep);
std::string trim(const std::string& s);

std::vector<double> parse_double_list(const std::string& s, const std::string& context);

std::string join_doubles(const Eigen::VectorXd& v, char sep = ' ');

void write_text_file(const std::string& path, const std::string& content);
std::string read_text_file(const std::string& path);

}  // namespace econdeepc

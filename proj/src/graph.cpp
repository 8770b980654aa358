#include "adedgedrop/graph.hpp"

#include <algorithm>
#include <charconv>
#include <cmath>
#include <cstdio>
#include <fstream>
#include <string>

#include "adedgedrop/error.hpp"

namespace adedgedrop {
namespace {

std::vector<std::string_view> split_fields(std::string_view line) {
  std::vector<std::string_view> out;
  std::size_t pos = 0;
  while (pos <= line.size()) {
    std::size_t tab = line.find('\t', pos);
    if (tab == std::string_view::npos) tab = line.size();
    out.push_back(line.substr(pos, tab - pos));
    pos = tab + 1;
  }
  return out;
}

std::string_view trim(std::string_view s) {
  while (!s.empty() && (s.back() == '\r' || s.back() == ' ')) s.remove_suffix(1);
  while (!s.empty() && s.front() == ' ') s.remove_prefix(1);
  return s;
}

template <typename T>
bool parse_number(std::string_view s, T& out) {
  s = trim(s);
  auto [ptr, ec] = std::from_chars(s.data(), s.data() + s.size(), out);
  return ec == std::errc() && ptr == s.data() + s.size() && !s.empty();
}

std::ifstream open_in(const std::filesystem::path& file) {
  std::ifstream in(file);
  if (!in) throw IoError("cannot open " + file.string());
  return in;
}

std::ofstream open_out(const std::filesystem::path& file) {
  std::ofstream out(file, std::ios::binary | std::ios::trunc);
  if (!out) throw IoError("cannot write " + file.string());
  return out;
}

bool skip_line(std::string_view line) {
  line = trim(line);
  return line.empty() || line.front() == '#';
}

/// Iterates data lines with 1-based line numbers.
template <typename Fn>
void for_each_line(const std::filesystem::path& file, Fn&& fn) {
  auto in = open_in(file);
  std::string line;
  std::size_t lineno = 0;
  while (std::getline(in, line)) {
    ++lineno;
    if (skip_line(line)) continue;
    fn(trim(line), lineno);
  }
  if (in.bad()) throw IoError("read failure on " + file.string());
}

}  // namespace

Graph Graph::from_edges(std::size_t num_nodes, std::span<const Edge> edges, LoadReport* report) {
  Graph g;
  g.num_nodes_ = num_nodes;
  LoadReport local;
  g.edges_.reserve(edges.size());
  for (const Edge& e : edges) {
    if (e.u >= num_nodes || e.v >= num_nodes) {
      throw ContractError("edge (" + std::to_string(e.u) + ", " + std::to_string(e.v) +
                          ") out of range for " + std::to_string(num_nodes) + " nodes");
    }
    if (e.u == e.v) {
      ++local.self_loops_dropped;
      continue;
    }
    g.edges_.push_back(Edge{std::min(e.u, e.v), std::max(e.u, e.v)});
  }
  std::sort(g.edges_.begin(), g.edges_.end());
  auto last = std::unique(g.edges_.begin(), g.edges_.end());
  local.merged_duplicates = static_cast<std::size_t>(g.edges_.end() - last);
  g.edges_.erase(last, g.edges_.end());

  g.degrees_.assign(num_nodes, 0);
  for (const Edge& e : g.edges_) {
    ++g.degrees_[e.u];
    ++g.degrees_[e.v];
  }
  std::vector<std::size_t> ptr(num_nodes + 1, 0);
  for (std::size_t i = 0; i < num_nodes; ++i) ptr[i + 1] = ptr[i] + g.degrees_[i];
  std::vector<std::size_t> idx(ptr.back());
  std::vector<std::size_t> next(ptr.begin(), ptr.end() - 1);
  // Sorted edge order fills each row's columns in increasing order: for row i
  // the (j, i) entries with j < i arrive before the (i, j) entries with j > i.
  for (const Edge& e : g.edges_) idx[next[e.v]++] = e.u;
  for (const Edge& e : g.edges_) idx[next[e.u]++] = e.v;
  std::vector<double> val(idx.size(), 1.0);
  g.adjacency_ = SparseMatrix(num_nodes, num_nodes, std::move(ptr), std::move(idx), std::move(val));
  if (report) *report = local;
  return g;
}

std::optional<EdgeId> Graph::edge_id(NodeId a, NodeId b) const {
  Edge key{std::min(a, b), std::max(a, b)};
  auto it = std::lower_bound(edges_.begin(), edges_.end(), key);
  if (it == edges_.end() || *it != key) return std::nullopt;
  return static_cast<EdgeId>(it - edges_.begin());
}

Graph Graph::subgraph(std::span<const std::uint8_t> keep) const {
  if (keep.size() != edges_.size()) {
    throw ShapeError("subgraph: mask has " + std::to_string(keep.size()) + " entries for " +
                     std::to_string(edges_.size()) + " edges");
  }
  std::vector<Edge> kept;
  for (std::size_t e = 0; e < edges_.size(); ++e)
    if (keep[e]) kept.push_back(edges_[e]);
  return from_edges(num_nodes_, kept);
}

std::span<const NodeId> LabelSplit::nodes(SplitKind which) const {
  switch (which) {
    case SplitKind::train: return train;
    case SplitKind::val: return val;
    case SplitKind::test: return test;
  }
  return {};
}

void LabelSplit::validate() const {
  std::vector<std::uint8_t> seen(labels.size(), 0);
  for (SplitKind k : {SplitKind::train, SplitKind::val, SplitKind::test}) {
    for (NodeId v : nodes(k)) {
      if (v >= labels.size()) throw ContractError("split node " + std::to_string(v) + " out of range");
      if (seen[v]) throw ContractError("node " + std::to_string(v) + " appears in two splits");
      seen[v] = 1;
      if (labels[v] < 0 || static_cast<std::size_t>(labels[v]) >= num_classes) {
        throw ContractError("split node " + std::to_string(v) + " has no valid label");
      }
    }
  }
}

Graph load_graph(const std::filesystem::path& edge_file, std::size_t num_nodes, LoadReport* report) {
  std::vector<Edge> edges;
  const std::string name = edge_file.string();
  for_each_line(edge_file, [&](std::string_view line, std::size_t lineno) {
    auto f = split_fields(line);
    std::size_t u = 0, v = 0;
    if (f.size() != 2 || !parse_number(f[0], u) || !parse_number(f[1], v)) {
      throw ParseError(name, lineno, "expected \"u<TAB>v\"");
    }
    if (u >= num_nodes || v >= num_nodes) {
      throw ParseError(name, lineno, "node index out of range (n=" + std::to_string(num_nodes) + ")");
    }
    edges.push_back(Edge{u, v});
  });
  return Graph::from_edges(num_nodes, edges, report);
}

FeatureMatrix load_features(const std::filesystem::path& file) {
  const std::string name = file.string();
  std::vector<std::pair<std::size_t, std::vector<double>>> rows;
  std::size_t width = 0;
  for_each_line(file, [&](std::string_view line, std::size_t lineno) {
    auto f = split_fields(line);
    std::size_t node = 0;
    if (f.size() < 2 || !parse_number(f[0], node)) throw ParseError(name, lineno, "expected node id then features");
    if (rows.empty()) width = f.size() - 1;
    if (f.size() - 1 != width) throw ParseError(name, lineno, "inconsistent feature width");
    std::vector<double> vals(width);
    for (std::size_t j = 0; j < width; ++j) {
      if (!parse_number(f[j + 1], vals[j]) || !std::isfinite(vals[j])) {
        throw ParseError(name, lineno, "non-numeric or non-finite feature");
      }
    }
    rows.emplace_back(node, std::move(vals));
  });
  FeatureMatrix x(rows.size(), width);
  std::vector<std::uint8_t> seen(rows.size(), 0);
  for (auto& [node, vals] : rows) {
    if (node >= rows.size() || seen[node]) {
      throw ParseError(name, 0, "node ids must cover 0..n-1 exactly once (bad id " + std::to_string(node) + ")");
    }
    seen[node] = 1;
    std::copy(vals.begin(), vals.end(), x.row(node).begin());
  }
  return x;
}

LabelSplit load_labels(const std::filesystem::path& labels_file,
                       const std::filesystem::path& splits_file, std::size_t num_nodes) {
  LabelSplit out;
  out.labels.assign(num_nodes, -1);
  int max_label = -1;
  const std::string lname = labels_file.string();
  for_each_line(labels_file, [&](std::string_view line, std::size_t lineno) {
    auto f = split_fields(line);
    std::size_t node = 0;
    int cls = 0;
    if (f.size() != 2 || !parse_number(f[0], node) || !parse_number(f[1], cls) || cls < 0) {
      throw ParseError(lname, lineno, "expected \"node<TAB>class\"");
    }
    if (node >= num_nodes) throw ParseError(lname, lineno, "node index out of range");
    out.labels[node] = cls;
    max_label = std::max(max_label, cls);
  });
  out.num_classes = static_cast<std::size_t>(max_label + 1);
  const std::string sname = splits_file.string();
  for_each_line(splits_file, [&](std::string_view line, std::size_t lineno) {
    auto f = split_fields(line);
    std::size_t node = 0;
    if (f.size() != 2 || !parse_number(f[0], node)) throw ParseError(sname, lineno, "expected \"node<TAB>split\"");
    if (node >= num_nodes) throw ParseError(sname, lineno, "node index out of range");
    std::string_view which = trim(f[1]);
    if (which == "train") out.train.push_back(node);
    else if (which == "val") out.val.push_back(node);
    else if (which == "test") out.test.push_back(node);
    else throw ParseError(sname, lineno, "split must be train, val or test");
  });
  try {
    out.validate();
  } catch (const ContractError& e) {
    throw ParseError(sname, 0, e.what());
  }
  return out;
}

void write_edges(const std::filesystem::path& file, std::span<const Edge> edges) {
  auto out = open_out(file);
  for (const Edge& e : edges) out << e.u << '\t' << e.v << '\n';
  if (!out) throw IoError("write failure on " + file.string());
}

void write_features(const std::filesystem::path& file, const FeatureMatrix& x) {
  auto out = open_out(file);
  char buf[32];
  for (std::size_t i = 0; i < x.rows(); ++i) {
    out << i;
    for (double v : x.row(i)) {
      std::snprintf(buf, sizeof buf, "%.17g", v);
      out << '\t' << buf;
    }
    out << '\n';
  }
  if (!out) throw IoError("write failure on " + file.string());
}

void write_labels(const std::filesystem::path& labels_file, const std::filesystem::path& splits_file,
                  const LabelSplit& labels) {
  {
    auto out = open_out(labels_file);
    for (std::size_t i = 0; i < labels.labels.size(); ++i)
      if (labels.labels[i] >= 0) out << i << '\t' << labels.labels[i] << '\n';
    if (!out) throw IoError("write failure on " + labels_file.string());
  }
  auto out = open_out(splits_file);
  for (NodeId v : labels.train) out << v << "\ttrain\n";
  for (NodeId v : labels.val) out << v << "\tval\n";
  for (NodeId v : labels.test) out << v << "\ttest\n";
  if (!out) throw IoError("write failure on " + splits_file.string());
}

SparseMatrix normalize_adjacency(const SparseMatrix& adj) {
  if (adj.rows() != adj.cols()) throw ShapeError("normalize_adjacency: matrix not square");
  const std::size_t n = adj.rows();
  std::vector<double> inv_sqrt(n);
  for (std::size_t i = 0; i < n; ++i) {
    if (adj.contains(i, i)) throw ContractError("normalize_adjacency: self-loop stored at node " + std::to_string(i));
    inv_sqrt[i] = 1.0 / std::sqrt(static_cast<double>(adj.row_cols(i).size() + 1));
  }
  std::vector<std::size_t> ptr(n + 1, 0), idx;
  std::vector<double> val;
  idx.reserve(adj.nnz() + n);
  val.reserve(adj.nnz() + n);
  for (std::size_t i = 0; i < n; ++i) {
    bool diag_done = false;
    for (std::size_t j : adj.row_cols(i)) {
      if (!diag_done && j > i) {
        idx.push_back(i);
        val.push_back(inv_sqrt[i] * inv_sqrt[i]);
        diag_done = true;
      }
      idx.push_back(j);
      val.push_back(inv_sqrt[i] * inv_sqrt[j]);
    }
    if (!diag_done) {
      idx.push_back(i);
      val.push_back(inv_sqrt[i] * inv_sqrt[i]);
    }
    ptr[i + 1] = idx.size();
  }
  return SparseMatrix(n, n, std::move(ptr), std::move(idx), std::move(val));
}

}  // namespace adedgedrop

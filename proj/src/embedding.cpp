#include "semco/embedding.hpp"

#include <algorithm>
#include <cctype>
#include <cstdlib>
#include <cmath>
#include <cstdio>
#include <fstream>
#include <sstream>

#include "semco/error.hpp"

namespace semco {

namespace {

std::string to_lower(const std::string& s) {
  std::string out = s;
  std::transform(out.begin(), out.end(), out.begin(),
                 [](unsigned char c) { return std::tolower(c); });
  return out;
}

std::string separators_to_space(const std::string& s) {
  std::string out = s;
  for (char& c : out)
    if (c == '_' || c == '-') c = ' ';
  return out;
}

std::vector<std::string> split_tokens(const std::string& s) {
  std::vector<std::string> tokens;
  std::string cur;
  for (char c : s) {
    if (c == ' ' || c == '_' || c == '-') {
      if (!cur.empty()) tokens.push_back(cur);
      cur.clear();
    } else {
      cur.push_back(c);
    }
  }
  if (!cur.empty()) tokens.push_back(cur);
  return tokens;
}

// Exact match, then lowercased match. -1 if neither resolves.
int find_term(const EmbeddingMatrix& emb, const std::string& term) {
  int idx = emb.find(term);
  if (idx >= 0) return idx;
  return emb.find(to_lower(term));
}

}  // namespace

EmbeddingMatrix load_embedding_file(const std::string& path) {
  std::ifstream in(path);
  if (!in) throw data_error("cannot open embedding file: " + path);

  std::vector<std::string> vocab;
  std::vector<std::vector<double>> rows;
  int dim = -1;
  std::string line;
  int lineno = 0;
  bool first = true;
  while (std::getline(in, line)) {
    ++lineno;
    if (line.empty()) continue;
    std::istringstream ss(line);
    std::string term;
    ss >> term;
    std::vector<double> vals;
    double v;
    while (ss >> v) vals.push_back(v);

    if (first) {
      first = false;
      // Tolerate a `|vocab| d` header: first field numeric, exactly one value.
      char* end = nullptr;
      std::strtod(term.c_str(), &end);
      if (end && *end == '\0' && vals.size() == 1) continue;
    }
    if (vals.empty())
      throw data_error(path + ":" + std::to_string(lineno) +
                       ": no vector values for term '" + term + "'");
    if (dim < 0) dim = static_cast<int>(vals.size());
    if (static_cast<int>(vals.size()) != dim)
      throw data_error(path + ":" + std::to_string(lineno) +
                       ": inconsistent dimension");
    double norm2 = 0.0;
    for (double x : vals) {
      if (!std::isfinite(x))
        throw data_error(path + ":" + std::to_string(lineno) +
                         ": non-finite value");
      norm2 += x * x;
    }
    if (norm2 == 0.0)
      throw data_error(path + ":" + std::to_string(lineno) + ": all-zero row");
    vocab.push_back(term);
    rows.push_back(std::move(vals));
  }
  if (rows.empty()) throw data_error("empty embedding file: " + path);

  EmbeddingMatrix emb;
  emb.vocab = std::move(vocab);
  emb.vectors.resize(static_cast<int>(rows.size()), dim);
  for (size_t i = 0; i < rows.size(); ++i)
    for (int j = 0; j < dim; ++j) emb.vectors(static_cast<int>(i), j) = rows[i][j];
  emb.rebuild_index();
  for (size_t i = 0; i < emb.vocab.size(); ++i)
    if (emb.find(emb.vocab[i]) != static_cast<int>(i))
      throw data_error(path + ": duplicate term '" + emb.vocab[i] + "'");
  return emb;
}

void save_embedding_file(const EmbeddingMatrix& emb, const std::string& path) {
  std::ofstream out(path);
  if (!out) throw data_error("cannot write embedding file: " + path);
  char buf[64];
  for (int i = 0; i < emb.size(); ++i) {
    out << emb.vocab[i];
    for (int j = 0; j < emb.dim(); ++j) {
      std::snprintf(buf, sizeof(buf), " %.12g", emb.vectors(i, j));
      out << buf;
    }
    out << '\n';
  }
}

Eigen::VectorXd lookup_label(const EmbeddingMatrix& emb,
                             const std::string& label) {
  if (label.empty()) throw data_error("empty label");

  auto finish = [&](const Eigen::VectorXd& v) {
    if (v.norm() == 0.0)
      throw data_error("label resolves to a zero vector: " + label);
    return v;
  };

  int idx = find_term(emb, label);
  if (idx >= 0) return finish(emb.vectors.row(idx));

  const std::string spaced = separators_to_space(label);
  if (spaced != label) {
    idx = find_term(emb, spaced);
    if (idx >= 0) return finish(emb.vectors.row(idx));
  }

  const auto tokens = split_tokens(label);
  Eigen::VectorXd sum = Eigen::VectorXd::Zero(emb.dim());
  int resolved = 0;
  for (const auto& tok : tokens) {
    int t = find_term(emb, tok);
    if (t >= 0) {
      sum += emb.vectors.row(t).transpose();
      ++resolved;
    }
  }
  if (resolved == 0) throw data_error("label unresolvable: " + label);
  return finish(sum / resolved);
}

EmbeddingMatrix build_label_matrix(const EmbeddingMatrix& emb,
                                   const std::vector<std::string>& labels) {
  EmbeddingMatrix out;
  out.vocab = labels;
  out.vectors.resize(static_cast<int>(labels.size()), emb.dim());
  for (size_t k = 0; k < labels.size(); ++k) {
    Eigen::VectorXd v;
    try {
      v = lookup_label(emb, labels[k]);
    } catch (const data_error& e) {
      throw data_error("label " + std::to_string(k) + " ('" + labels[k] +
                       "'): " + e.what());
    }
    out.vectors.row(static_cast<int>(k)) = v.transpose() / v.norm();
  }
  out.rebuild_index();
  return out;
}

}  // namespace semco

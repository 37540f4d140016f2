// Copyright 2026 The crossplace Authors
//
// Licensed under the Apache License, Version 2.0 (the "License");
// you may not use this file except in compliance with the License.
// You may obtain a copy of the License at
//
//     http://www.apache.org/licenses/LICENSE-2.0
//
// Unless required by applicable law or agreed to in writing, software
// distributed under the License is distributed on an "AS IS" BASIS,
// WITHOUT WARRANTIES OR CONDITIONS OF ANY KIND, either express or implied.
// See the License for the specific language governing permissions and
// limitations under the License.

#pragma once

#include <Eigen/Core>

#include <bit>
#include <cmath>
#include <cstdint>
#include <cstring>
#include <fstream>
#include <istream>
#include <ostream>
#include <sstream>
#include <string>

#include "crossplace/error.hpp"
#include "crossplace/features.hpp"
#include "crossplace/nmf.hpp"
#include "crossplace/vlad.hpp"

namespace crossplace {

/// Unit-norm place descriptor: the CNN-branch VLAD vector followed by the
/// NMF-branch VLAD vector, normalized jointly.
struct GlobalDescriptor {
  Eigen::VectorXd values;

  Eigen::Index size() const { return values.size(); }
  double distance(const GlobalDescriptor& o) const {
    if (o.size() != size()) throw DimensionError("descriptor lengths differ");
    return (values - o.values).norm();
  }
  friend bool operator==(const GlobalDescriptor& a, const GlobalDescriptor& b) {
    return a.values.size() == b.values.size() && a.values == b.values;
  }
};

/// Shared-weight encoder. One instance serves camera and depth images alike;
/// there are no modality-specific parameters. An empty basis disables the
/// NMF branch.
struct EncoderModel {
  ExtractorConfig extractor;
  NonNegMatrix nmf_basis;  // K x C
  NmfProjectOptions nmf_project;
  VladParams vlad_cnn;     // dim C
  VladParams vlad_nmf;     // dim K

  bool has_nmf_branch() const { return nmf_basis.rows() > 0; }

  int descriptor_length() const {
    return vlad_cnn.output_length() + (has_nmf_branch() ? vlad_nmf.output_length() : 0);
  }

  void validate() const {
    extractor.validate();
    vlad_cnn.validate();
    if (vlad_cnn.dim() != extractor.channels()) throw DimensionError("cnn vlad dim does not match extractor channels");
    if (has_nmf_branch()) {
      vlad_nmf.validate();
      if (nmf_basis.cols() != extractor.channels()) throw DimensionError("nmf basis width does not match channels");
      if (vlad_nmf.dim() != nmf_basis.rows()) throw DimensionError("nmf vlad dim does not match basis rank");
    }
  }

  friend bool operator==(const EncoderModel& a, const EncoderModel& b) {
    return a.extractor == b.extractor && a.nmf_basis == b.nmf_basis &&
           a.nmf_project.max_iters == b.nmf_project.max_iters && a.nmf_project.tol == b.nmf_project.tol &&
           a.vlad_cnn == b.vlad_cnn && (!a.has_nmf_branch() || a.vlad_nmf == b.vlad_nmf);
  }
};

/// Local and semantic features of one frame; the only inputs the trainable
/// part of the encoder sees.
struct FrameFeatures {
  Eigen::MatrixXd local;     // locations x C
  Eigen::MatrixXd semantic;  // locations x K, empty without the NMF branch
};

inline FrameFeatures compute_frame_features(const ImageView& image, const EncoderModel& model,
                                            const FeatureExtractor* extractor = nullptr) {
  FrameFeatures ff;
  FeatureMap f = extractor ? extractor->extract(image) : extract_local_features(image, model.extractor);
  if (f.c != model.extractor.channels()) throw DimensionError("extractor channel count does not match model");
  if (model.has_nmf_branch()) ff.semantic = semantic_feature_map(f, model.nmf_basis, model.nmf_project).data;
  ff.local = std::move(f.data);
  return ff;
}

struct DescriptorForward {
  VladForward cnn;
  VladForward nmf;
  Eigen::VectorXd concat;
  double concat_norm = 0.0;
  GlobalDescriptor descriptor;
};

inline DescriptorForward descriptor_forward(const FrameFeatures& ff, const EncoderModel& model) {
  DescriptorForward fw;
  fw.cnn = vlad_forward(ff.local, model.vlad_cnn);
  if (model.has_nmf_branch()) {
    fw.nmf = vlad_forward(ff.semantic, model.vlad_nmf);
    fw.concat.resize(fw.cnn.output.size() + fw.nmf.output.size());
    fw.concat << fw.cnn.output, fw.nmf.output;
  } else {
    fw.concat = fw.cnn.output;
  }
  fw.concat_norm = fw.concat.norm();
  fw.descriptor.values = fw.concat_norm > 0.0 ? Eigen::VectorXd(fw.concat / fw.concat_norm) : fw.concat;
  return fw;
}

struct EncoderGradients {
  VladParams cnn;
  VladParams nmf;

  static EncoderGradients zeros_like(const EncoderModel& m) {
    EncoderGradients g;
    g.cnn = VladParams::zeros(m.vlad_cnn.clusters(), m.vlad_cnn.dim());
    if (m.has_nmf_branch()) g.nmf = VladParams::zeros(m.vlad_nmf.clusters(), m.vlad_nmf.dim());
    return g;
  }
  EncoderGradients& operator+=(const EncoderGradients& o) {
    cnn += o.cnn;
    if (nmf.clusters() > 0) nmf += o.nmf;
    return *this;
  }
};

/// Backpropagates a descriptor gradient into both VLAD branches.
inline EncoderGradients descriptor_backward(const FrameFeatures& ff, const EncoderModel& model,
                                            const DescriptorForward& fw, const Eigen::VectorXd& d_descriptor) {
  const Eigen::VectorXd d_concat = detail::normalize_backward(fw.descriptor.values, fw.concat_norm, d_descriptor);
  EncoderGradients g;
  const Eigen::Index n_cnn = fw.cnn.output.size();
  g.cnn = vlad_backward(ff.local, model.vlad_cnn, fw.cnn, d_concat.head(n_cnn));
  if (model.has_nmf_branch()) {
    g.nmf = vlad_backward(ff.semantic, model.vlad_nmf, fw.nmf, d_concat.tail(d_concat.size() - n_cnn));
  }
  return g;
}

inline GlobalDescriptor encode_features(const FrameFeatures& ff, const EncoderModel& model) {
  return descriptor_forward(ff, model).descriptor;
}

/// Full encoder: local features, NMF semantic features, two VLAD branches,
/// joint normalization. `image` is a completed depth image or a camera image.
inline GlobalDescriptor encode(const ImageView& image, const EncoderModel& model,
                               const FeatureExtractor* extractor = nullptr) {
  return encode_features(compute_frame_features(image, model, extractor), model);
}

// ---------------------------------------------------------------------------
// Model file. Little-endian binary:
//   "XPLM" | u32 version
//   extractor: i32 grid_h, i32 grid_w, i32 orientations, u8 normalization, u8 normalize_histogram,
//              f64 histogram_epsilon, u8 canonical_polarity, i32 smoothing_radius, u8 soft_binning
//   nmf projection: i32 max_iters, f64 tol
//   basis: i32 rows, i32 cols, f64[rows*cols] row-major
//   vlad cnn, vlad nmf: i32 clusters, i32 dim, centers, weights (row-major), bias
// The NMF vlad block is written with zero clusters when the branch is off.

inline constexpr std::uint32_t kModelFormatVersion = 1;

namespace detail {
static_assert(std::endian::native == std::endian::little, "model IO assumes a little-endian host");

template <class T>
void write_pod(std::ostream& os, T v) {
  os.write(reinterpret_cast<const char*>(&v), sizeof(T));
}

template <class T>
T read_pod(std::istream& is) {
  T v{};
  is.read(reinterpret_cast<char*>(&v), sizeof(T));
  if (!is) throw DataError("model file truncated");
  return v;
}

inline void write_matrix(std::ostream& os, const Eigen::MatrixXd& m) {
  write_pod<std::int32_t>(os, static_cast<std::int32_t>(m.rows()));
  write_pod<std::int32_t>(os, static_cast<std::int32_t>(m.cols()));
  for (Eigen::Index r = 0; r < m.rows(); ++r)
    for (Eigen::Index c = 0; c < m.cols(); ++c) write_pod<double>(os, m(r, c));
}

inline Eigen::MatrixXd read_matrix(std::istream& is) {
  const auto rows = read_pod<std::int32_t>(is);
  const auto cols = read_pod<std::int32_t>(is);
  if (rows < 0 || cols < 0 || static_cast<std::int64_t>(rows) * cols > (1LL << 28)) {
    throw DataError("model file has an implausible matrix header");
  }
  Eigen::MatrixXd m(rows, cols);
  for (Eigen::Index r = 0; r < rows; ++r)
    for (Eigen::Index c = 0; c < cols; ++c) m(r, c) = read_pod<double>(is);
  return m;
}

inline void write_vlad(std::ostream& os, const VladParams& p) {
  write_pod<std::int32_t>(os, p.clusters());
  write_pod<std::int32_t>(os, p.dim());
  for (const Eigen::MatrixXd* m : {&p.centers, &p.weights})
    for (Eigen::Index r = 0; r < m->rows(); ++r)
      for (Eigen::Index c = 0; c < m->cols(); ++c) write_pod<double>(os, (*m)(r, c));
  for (Eigen::Index k = 0; k < p.bias.size(); ++k) write_pod<double>(os, p.bias(k));
}

inline VladParams read_vlad(std::istream& is) {
  const auto clusters = read_pod<std::int32_t>(is);
  const auto dim = read_pod<std::int32_t>(is);
  if (clusters < 0 || dim < 0 || static_cast<std::int64_t>(clusters) * dim > (1LL << 26)) {
    throw DataError("model file has an implausible vlad header");
  }
  VladParams p = VladParams::zeros(clusters, dim);
  for (Eigen::MatrixXd* m : {&p.centers, &p.weights})
    for (Eigen::Index r = 0; r < clusters; ++r)
      for (Eigen::Index c = 0; c < dim; ++c) (*m)(r, c) = read_pod<double>(is);
  for (Eigen::Index k = 0; k < clusters; ++k) p.bias(k) = read_pod<double>(is);
  return p;
}
}  // namespace detail

inline void write_model(std::ostream& os, const EncoderModel& model) {
  os.write("XPLM", 4);
  detail::write_pod<std::uint32_t>(os, kModelFormatVersion);
  detail::write_pod<std::int32_t>(os, model.extractor.grid_h);
  detail::write_pod<std::int32_t>(os, model.extractor.grid_w);
  detail::write_pod<std::int32_t>(os, model.extractor.orientations);
  detail::write_pod<std::uint8_t>(os, static_cast<std::uint8_t>(model.extractor.normalization));
  detail::write_pod<std::uint8_t>(os, model.extractor.normalize_histogram ? 1 : 0);
  detail::write_pod<double>(os, model.extractor.histogram_epsilon);
  detail::write_pod<std::uint8_t>(os, model.extractor.canonical_polarity ? 1 : 0);
  detail::write_pod<std::int32_t>(os, model.extractor.smoothing_radius);
  detail::write_pod<std::uint8_t>(os, model.extractor.soft_binning ? 1 : 0);
  detail::write_pod<std::int32_t>(os, model.nmf_project.max_iters);
  detail::write_pod<double>(os, model.nmf_project.tol);
  detail::write_matrix(os, model.nmf_basis.matrix());
  detail::write_vlad(os, model.vlad_cnn);
  detail::write_vlad(os, model.has_nmf_branch() ? model.vlad_nmf : VladParams{});
}

inline EncoderModel read_model(std::istream& is) {
  char magic[4] = {};
  is.read(magic, 4);
  if (!is || std::memcmp(magic, "XPLM", 4) != 0) throw DataError("not a crossplace model file");
  const auto version = detail::read_pod<std::uint32_t>(is);
  if (version != kModelFormatVersion) throw DataError("unsupported model format version " + std::to_string(version));
  EncoderModel m;
  m.extractor.grid_h = detail::read_pod<std::int32_t>(is);
  m.extractor.grid_w = detail::read_pod<std::int32_t>(is);
  m.extractor.orientations = detail::read_pod<std::int32_t>(is);
  const auto norm = detail::read_pod<std::uint8_t>(is);
  if (norm > 2) throw DataError("model file has an unknown input normalization");
  m.extractor.normalization = static_cast<InputNormalization>(norm);
  m.extractor.normalize_histogram = detail::read_pod<std::uint8_t>(is) != 0;
  m.extractor.histogram_epsilon = detail::read_pod<double>(is);
  m.extractor.canonical_polarity = detail::read_pod<std::uint8_t>(is) != 0;
  m.extractor.smoothing_radius = detail::read_pod<std::int32_t>(is);
  m.extractor.soft_binning = detail::read_pod<std::uint8_t>(is) != 0;
  m.nmf_project.max_iters = detail::read_pod<std::int32_t>(is);
  m.nmf_project.tol = detail::read_pod<double>(is);
  try {
    m.nmf_basis = NonNegMatrix(detail::read_matrix(is));
  } catch (const InvalidArgument& e) {
    throw DataError(std::string("model nmf basis: ") + e.what());
  }
  m.vlad_cnn = detail::read_vlad(is);
  m.vlad_nmf = detail::read_vlad(is);
  try {
    m.validate();
  } catch (const Error& e) {
    throw DataError(std::string("inconsistent model file: ") + e.what());
  }
  return m;
}

inline void save_model(const std::string& path, const EncoderModel& model) {
  std::ofstream os(path, std::ios::binary | std::ios::trunc);
  if (!os) throw DataError("cannot open model file for writing: " + path);
  write_model(os, model);
  if (!os) throw DataError("failed writing model file: " + path);
}

inline EncoderModel load_model(const std::string& path) {
  std::ifstream is(path, std::ios::binary);
  if (!is) throw DataError("cannot open model file: " + path);
  return read_model(is);
}

inline std::string model_bytes(const EncoderModel& model) {
  std::ostringstream os(std::ios::binary);
  write_model(os, model);
  return os.str();
}

}  // namespace crossplace

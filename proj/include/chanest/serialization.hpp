#pragma once

// JSON text records for channels, training designs and estimation results.
// Complex numbers are written as [re, im] pairs in both scalar modes so that a
// file does not depend on how it was produced.

#include "chanest/channel_model.hpp"
#include "chanest/estimators.hpp"

#include <string>

namespace chanest {

template <typename Scalar>
std::string channel_to_json(const VirtualChannel<Scalar>& channel);

/// Throws InvalidArgument on malformed input or inconsistent fields.
template <typename Scalar>
VirtualChannel<Scalar> channel_from_json(const std::string& text);

template <typename Scalar>
std::string training_to_json(const TrainingDesign<Scalar>& training);

template <typename Scalar>
TrainingDesign<Scalar> training_from_json(const std::string& text);

template <typename Scalar>
std::string result_to_json(const EstimationResult<Scalar>& result);

void write_text_file(const std::string& path, const std::string& text);
std::string read_text_file(const std::string& path);

}  // namespace chanest

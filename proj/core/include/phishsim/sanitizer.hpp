#pragma once

#include <cstddef>
#include <string>
#include <string_view>

#include "phishsim/document.hpp"

namespace phishsim {

struct SanitizeOptions {
    /// Keep element attributes in the skeleton. Attributes are part of the
    /// rendered tag and distinguish kits that differ only in class/style
    /// hooks; `--strip-attributes` turns them off.
    bool keep_attributes = true;
};

/// A document reduced to its tag skeleton: no text nodes, no comments,
/// no CDATA, script/style contents removed.
struct SanitizedDocument {
    ByteDocument doc;  // bytes hold the sanitized serialization
    std::size_t original_len = 0;
    std::size_t sanitized_len = 0;
};

/// Reduces HTML bytes to a serialization of the recovered element tree:
/// start tags with attributes in document order, close tags balancing them.
/// Unclosed elements are closed at end of input; stray end tags are dropped.
/// Throws SanitizeError when the input yields no elements at all.
std::string sanitize_html_bytes(std::string_view raw, const SanitizeOptions& opts = {});

/// sanitize_html_bytes applied to a document, carrying metadata through.
SanitizedDocument sanitize_html(const ByteDocument& raw, const SanitizeOptions& opts = {});

}  // namespace phishsim

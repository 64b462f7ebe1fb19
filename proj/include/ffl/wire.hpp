#pragma once

#include <cstdint>
#include <stdexcept>
#include <string>
#include <variant>
#include <vector>

#include "ffl/tensor.hpp"

namespace ffl {

namespace msg {

struct Register {
  std::string site_id;
  std::uint32_t n_train = 0;
  bool operator==(const Register&) const = default;
};

struct GlobalBackbone {
  std::uint32_t round = 0;
  Parameters params;
  bool operator==(const GlobalBackbone&) const = default;
};

struct LocalBackbone {
  std::uint32_t round = 0;
  std::string site_id;
  Parameters params;
  std::uint32_t n_train = 0;
  bool operator==(const LocalBackbone&) const = default;
};

struct EnterFineTune {
  bool operator==(const EnterFineTune&) const = default;
};

struct Shutdown {
  bool operator==(const Shutdown&) const = default;
};

}  // namespace msg

using RoundMessage = std::variant<msg::Register, msg::GlobalBackbone, msg::LocalBackbone,
                                  msg::EnterFineTune, msg::Shutdown>;

enum class WireErrorKind { BadMagic, BadVersion, Truncated, UnknownTag, Malformed };

struct WireError : std::runtime_error {
  WireErrorKind kind;
  WireError(WireErrorKind k, const std::string& what) : std::runtime_error(what), kind(k) {}
};

/// Frame: "FFL1" | version u8=1 | msg-type u8 | payload-length u32 LE | payload.
std::vector<std::uint8_t> encodeMessage(const RoundMessage& m);
RoundMessage decodeMessage(const std::vector<std::uint8_t>& bytes);

/// Frame length implied by the 10-byte header; throws Truncated/BadMagic early.
std::size_t frameLength(const std::uint8_t* header, std::size_t available);

constexpr std::size_t kFrameHeaderSize = 10;

}  // namespace ffl

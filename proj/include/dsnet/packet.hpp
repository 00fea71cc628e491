#pragma once

#include <cstdint>
#include <optional>
#include <string_view>

#include "dsnet/common.hpp"

namespace dsnet {

enum class Color : std::uint8_t { Green, Yellow, Red };

std::string_view to_string(Color c);

struct Packet {
  std::uint64_t id = 0;
  NodeId src = 0;
  NodeId dst = 0;
  std::uint32_t size = 0;
  std::uint8_t ds_field = 0;
  std::uint8_t class_index = 0;
  Color color = Color::Green;
  SimTime created_at = 0;

  friend bool operator==(const Packet&, const Packet&) = default;
};

}  // namespace dsnet

namespace dsnet {

enum class DropStage : std::uint8_t { None, Routing, Red, QueueFull };

std::string_view to_string(DropStage s);

// One line of the per-packet record file: a delivery or a drop.
struct PacketRecord {
  std::uint64_t pkt_id = 0;
  NodeId src = 0;
  NodeId dst = 0;
  std::uint8_t class_index = 0;
  Color color = Color::Green;
  SimTime created_ns = 0;
  std::optional<SimTime> delivered_ns;
  std::optional<NodeId> drop_node;
  DropStage drop_stage = DropStage::None;

  friend bool operator==(const PacketRecord&, const PacketRecord&) = default;
};

}  // namespace dsnet

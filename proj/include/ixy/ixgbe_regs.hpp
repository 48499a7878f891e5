#pragma once

#include <cstdint>

// 82599-family register offsets and bits; the subset the driver programs.
namespace ixy::regs {

constexpr std::uint32_t CTRL = 0x00000;
constexpr std::uint32_t CTRL_LNK_RST = 0x00000008;
constexpr std::uint32_t CTRL_RST = 0x04000000;
constexpr std::uint32_t CTRL_RST_MASK = CTRL_LNK_RST | CTRL_RST;

constexpr std::uint32_t STATUS = 0x00008;

constexpr std::uint32_t EIMC = 0x00888;
constexpr std::uint32_t EIMC_ALL = 0x7FFFFFFF;

constexpr std::uint32_t EEC = 0x10010;
constexpr std::uint32_t EEC_ARD = 0x00000200;

constexpr std::uint32_t RDRXCTL = 0x02F00;
constexpr std::uint32_t RDRXCTL_DMAIDONE = 0x00000008;

constexpr std::uint32_t AUTOC = 0x042A0;
constexpr std::uint32_t AUTOC_AN_RESTART = 0x00001000;
constexpr std::uint32_t LINKS = 0x042A4;
constexpr std::uint32_t LINKS_UP = 0x40000000;
constexpr std::uint32_t LINKS_SPEED_MASK = 0x30000000;
constexpr std::uint32_t LINKS_SPEED_100M = 0x10000000;
constexpr std::uint32_t LINKS_SPEED_1G = 0x20000000;
constexpr std::uint32_t LINKS_SPEED_10G = 0x30000000;

constexpr std::uint32_t HLREG0 = 0x04240;
constexpr std::uint32_t HLREG0_TXCRCEN = 0x00000001;
constexpr std::uint32_t HLREG0_RXCRCSTRP = 0x00000002;
constexpr std::uint32_t HLREG0_TXPADEN = 0x00000400;

constexpr std::uint32_t FCTRL = 0x05080;
constexpr std::uint32_t FCTRL_MPE = 0x00000100;
constexpr std::uint32_t FCTRL_UPE = 0x00000200;
constexpr std::uint32_t FCTRL_BAM = 0x00000400;

constexpr std::uint32_t RXCTRL = 0x03000;
constexpr std::uint32_t RXCTRL_RXEN = 0x00000001;

constexpr std::uint32_t DMATXCTL = 0x04A80;
constexpr std::uint32_t DMATXCTL_TE = 0x00000001;

// Receive address filter 0 (station MAC).
constexpr std::uint32_t RAL0 = 0x0A200;
constexpr std::uint32_t RAH0 = 0x0A204;
constexpr std::uint32_t RAH_AV = 0x80000000;

// Statistics, all clear-on-read.
constexpr std::uint32_t GPRC = 0x04074;
constexpr std::uint32_t GPTC = 0x04080;
constexpr std::uint32_t GORCL = 0x04088;
constexpr std::uint32_t GORCH = 0x0408C;
constexpr std::uint32_t GOTCL = 0x04090;
constexpr std::uint32_t GOTCH = 0x04094;
constexpr std::uint32_t MPC0 = 0x03FA0;

// Per-queue receive registers (queues 0..63).
constexpr std::uint32_t RDBAL(std::uint32_t q) { return 0x01000 + q * 0x40; }
constexpr std::uint32_t RDBAH(std::uint32_t q) { return 0x01004 + q * 0x40; }
constexpr std::uint32_t RDLEN(std::uint32_t q) { return 0x01008 + q * 0x40; }
constexpr std::uint32_t RDH(std::uint32_t q) { return 0x01010 + q * 0x40; }
constexpr std::uint32_t RDT(std::uint32_t q) { return 0x01018 + q * 0x40; }
constexpr std::uint32_t RXDCTL(std::uint32_t q) { return 0x01028 + q * 0x40; }
constexpr std::uint32_t SRRCTL(std::uint32_t q) { return 0x02100 + q * 4; }
constexpr std::uint32_t RXDCTL_ENABLE = 0x02000000;
constexpr std::uint32_t SRRCTL_BSIZEPKT_MASK = 0x0000001F;
constexpr std::uint32_t SRRCTL_DESCTYPE_ADV_ONEBUF = 0x02000000;
constexpr std::uint32_t SRRCTL_DROP_EN = 0x10000000;

// Per-queue transmit registers.
constexpr std::uint32_t TDBAL(std::uint32_t q) { return 0x06000 + q * 0x40; }
constexpr std::uint32_t TDBAH(std::uint32_t q) { return 0x06004 + q * 0x40; }
constexpr std::uint32_t TDLEN(std::uint32_t q) { return 0x06008 + q * 0x40; }
constexpr std::uint32_t TDH(std::uint32_t q) { return 0x06010 + q * 0x40; }
constexpr std::uint32_t TDT(std::uint32_t q) { return 0x06018 + q * 0x40; }
constexpr std::uint32_t TXDCTL(std::uint32_t q) { return 0x06028 + q * 0x40; }
constexpr std::uint32_t TXDCTL_ENABLE = 0x02000000;

// BAR0 size of the 82599.
constexpr std::uint32_t BAR0_LENGTH = 0x80000;

} // namespace ixy::regs

// Advanced descriptor layout, 16 bytes per slot.
namespace ixy::desc {

constexpr std::uint32_t SIZE = 16;

// Receive, read format: word0/1 packet buffer address, word2/3 header address.
// Receive, write-back: word2 status/error, word3 low half = length.
constexpr std::uint32_t RX_PKT_ADDR = 0;
constexpr std::uint32_t RX_HDR_ADDR = 8;
constexpr std::uint32_t RX_STATUS = 8;
constexpr std::uint32_t RX_LENGTH = 12;
constexpr std::uint32_t RXD_STAT_DD = 0x01;
constexpr std::uint32_t RXD_STAT_EOP = 0x02;

// Transmit, read format: word0/1 buffer address, word2 cmd_type_len, word3 olinfo_status.
// Transmit, write-back: word3 status.
constexpr std::uint32_t TX_BUF_ADDR = 0;
constexpr std::uint32_t TX_CMD_TYPE_LEN = 8;
constexpr std::uint32_t TX_OLINFO_STATUS = 12;
constexpr std::uint32_t TXD_LEN_MASK = 0x0000FFFF;
constexpr std::uint32_t TXD_DTYP_DATA = 0x00300000;
constexpr std::uint32_t TXD_CMD_EOP = 0x01000000;
constexpr std::uint32_t TXD_CMD_IFCS = 0x02000000;
constexpr std::uint32_t TXD_CMD_RS = 0x08000000;
constexpr std::uint32_t TXD_CMD_DEXT = 0x20000000;
constexpr std::uint32_t TXD_PAYLEN_SHIFT = 14;
constexpr std::uint32_t TXD_STAT_DD = 0x01;

} // namespace ixy::desc

export {
  MsgType,
  PROTOCOL_VERSION,
  ProtocolError,
  FrameBuffer,
  encodeFrame,
  encodePayload,
  decodePayload,
} from "./protocol.js";
export type { Frame } from "./protocol.js";
export {
  ClientEnv,
  N_MOTORS,
  ServerError,
  VersionMismatchError,
} from "./client.js";
export type { Manifests } from "./client.js";
export {
  flattenObservation,
  packBits,
  repackObservation,
  unpackBits,
  unpackObservation,
} from "./obs.js";
export type { Observation, ObservationLayout, RetinaImage } from "./obs.js";
export {
  HabituatingLooker,
  ORACLES,
  gazeAction,
  idealLooker,
  makeOracle,
  randomGaze,
  reflexToucher,
} from "./oracles.js";
export type { Policy } from "./oracles.js";
export { runOracle, behaviorLogLines } from "./runner.js";
export type { BehaviorRecord } from "./runner.js";
export { Rng } from "./rng.js";

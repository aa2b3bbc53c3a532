export * from "./api.js";
export * from "./palette.js";
export * from "./brush.js";
export * from "./store.js";
export * from "./playback.js";
export * from "./views.js";

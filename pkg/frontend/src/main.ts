// Browser entry point. The page is served by the gateway under /ui, so
// API calls go to the same origin with an empty base.

import { ApiClient } from "./api.js";
import { startApp } from "./app.js";

const root = document.getElementById("app");
if (root !== null) {
  startApp(root, new ApiClient(""));
}

// Browser entry point: mount the app on #app against the serving origin.

import { Api } from "./api.js";
import { init } from "./main.js";

const root = document.getElementById("app");
if (root) {
  init(root, new Api("")).catch((err) => {
    root.textContent = `failed to start: ${err instanceof Error ? err.message : err}`;
  });
}

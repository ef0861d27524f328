/** Boot the review screen against the same origin that served it.
 *
 * The API mounts the built assets under /ui, so relative fetches land
 * on the API itself; ?api=<base> points elsewhere during development
 * and ?run=<id> picks a run when the root holds several.
 */

import { ReviewApp } from "./app.js";
import { ReviewApi } from "./client.js";

const params = new URLSearchParams(window.location.search);
const api = new ReviewApi(params.get("api") ?? "");
const root = document.getElementById("app");

if (root) {
  const app = new ReviewApp({ api, root, runId: params.get("run") ?? undefined });
  void app.start();
}

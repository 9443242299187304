import { ApiClient } from "./api.js";
import { RaterApp } from "./app.js";

const root = document.getElementById("app");
if (!root) throw new Error("missing #app mount point");
new RaterApp(root, new ApiClient("")).renderStart();

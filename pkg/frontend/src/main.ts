import { TutorApi } from "./api.js";
import { createApp } from "./app.js";

declare global {
    interface Window {
        CODETUTOR_API_BASE?: string;
    }
}

document.addEventListener("DOMContentLoaded", () => {
    const root = document.getElementById("app");
    if (root === null) {
        throw new Error("index.html must contain an #app element");
    }
    const base = window.CODETUTOR_API_BASE ?? "";
    void createApp(root, {
        api: new TutorApi(base),
        storage: window.localStorage,
    });
});

import { MessageDto, Outcome } from "./api.js";

export type UiOutcome = Outcome | "error";

export interface UiConversationState {
    sessionId: string | null;
    exerciseId: string | null;
    messages: MessageDto[];
    pending: boolean;
    lastOutcome: UiOutcome | null;
}

export function initialState(): UiConversationState {
    return {
        sessionId: null,
        exerciseId: null,
        messages: [],
        pending: false,
        lastOutcome: null,
    };
}

const STORAGE_KEY = "codetutor.session";

export interface StoredSession {
    sessionId: string;
    exerciseId: string;
}

export function loadStoredSession(storage: Storage): StoredSession | null {
    const raw = storage.getItem(STORAGE_KEY);
    if (!raw) {
        return null;
    }
    try {
        const parsed = JSON.parse(raw);
        if (typeof parsed.sessionId === "string" && typeof parsed.exerciseId === "string") {
            return parsed;
        }
    } catch {
        // fall through: a corrupt entry is the same as no entry
    }
    storage.removeItem(STORAGE_KEY);
    return null;
}

export function storeSession(storage: Storage, session: StoredSession | null) {
    if (session === null) {
        storage.removeItem(STORAGE_KEY);
    } else {
        storage.setItem(STORAGE_KEY, JSON.stringify(session));
    }
}

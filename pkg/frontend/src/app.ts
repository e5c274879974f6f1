import {
    ApiError,
    ExerciseInfo,
    MessageDto,
    Outcome,
    PostMessageResult,
    SessionDto,
} from "./api.js";
import { renderMessageBody } from "./markdown.js";
import {
    UiConversationState,
    initialState,
    loadStoredSession,
    storeSession,
} from "./state.js";

/** What the app needs from the server; TutorApi satisfies this. */
export interface TutorBackend {
    listExercises(): Promise<ExerciseInfo[]>;
    createSession(exerciseId: string, studentId: string): Promise<SessionDto>;
    getSession(sessionId: string): Promise<SessionDto>;
    postMessage(sessionId: string, content: string): Promise<PostMessageResult>;
}

export interface AppOptions {
    api: TutorBackend;
    storage: Storage;
    studentId?: string;
    /** Pause before the single client-side retry after a 409. */
    retryDelayMs?: number;
}

export interface App {
    start(exerciseId: string): Promise<void>;
    send(text: string): Promise<void>;
    getState(): UiConversationState;
    root: HTMLElement;
}

function delay(ms: number): Promise<void> {
    return new Promise((resolve) => setTimeout(resolve, ms));
}

export async function createApp(root: HTMLElement, options: AppOptions): Promise<App> {
    const api = options.api;
    const storage = options.storage;
    const studentId = options.studentId ?? "browser";
    const retryDelayMs = options.retryDelayMs ?? 750;
    const state = initialState();

    root.textContent = "";

    const picker = document.createElement("section");
    picker.className = "picker";
    const pickerLabel = document.createElement("label");
    pickerLabel.textContent = "Exercise: ";
    const select = document.createElement("select");
    pickerLabel.appendChild(select);
    const startButton = document.createElement("button");
    startButton.type = "button";
    startButton.className = "start";
    startButton.textContent = "Start session";
    picker.appendChild(pickerLabel);
    picker.appendChild(startButton);

    const chat = document.createElement("section");
    chat.className = "chat";
    chat.hidden = true;
    const messageList = document.createElement("ul");
    messageList.className = "messages";
    const typing = document.createElement("div");
    typing.className = "typing";
    typing.textContent = "The tutor is thinking…";
    typing.hidden = true;
    const status = document.createElement("div");
    status.className = "status";
    status.setAttribute("role", "status");
    const composer = document.createElement("form");
    composer.className = "composer";
    const input = document.createElement("input");
    input.type = "text";
    input.name = "question";
    input.placeholder = "Ask about the exercise…";
    input.autocomplete = "off";
    const sendButton = document.createElement("button");
    sendButton.type = "submit";
    sendButton.className = "send";
    sendButton.textContent = "Send";
    composer.appendChild(input);
    composer.appendChild(sendButton);
    chat.appendChild(messageList);
    chat.appendChild(typing);
    chat.appendChild(status);
    chat.appendChild(composer);

    root.appendChild(picker);
    root.appendChild(chat);

    function setPending(pending: boolean) {
        state.pending = pending;
        input.disabled = pending;
        sendButton.disabled = pending;
        typing.hidden = !pending;
    }

    function clearNotice() {
        status.textContent = "";
    }

    function notice(kind: string, text: string, retryText?: string) {
        clearNotice();
        const span = document.createElement("span");
        span.className = `notice notice-${kind}`;
        span.textContent = text;
        status.appendChild(span);
        if (retryText !== undefined) {
            const retry = document.createElement("button");
            retry.type = "button";
            retry.className = "retry";
            retry.textContent = retryText;
            retry.addEventListener("click", () => {
                void send(input.value);
            });
            status.appendChild(retry);
        }
    }

    function appendBubble(message: MessageDto): HTMLElement | null {
        if (message.role === "system") {
            return null;
        }
        const bubble = document.createElement("li");
        bubble.className = `bubble ${message.role}`;
        if (message.role === "tutor") {
            bubble.appendChild(renderMessageBody(message.content));
        } else {
            bubble.textContent = message.content;
        }
        messageList.appendChild(bubble);
        messageList.scrollTop = messageList.scrollHeight;
        return bubble;
    }

    function renderAll(messages: MessageDto[]) {
        messageList.textContent = "";
        for (const message of messages) {
            appendBubble(message);
        }
    }

    function renderOutcome(outcome: Outcome) {
        state.lastOutcome = outcome;
        if (outcome === "rejected_off_topic") {
            notice("offtopic", "off-topic — please rephrase");
        } else if (outcome === "fallback") {
            notice("fallback", "If you are stuck, contact a human tutor.");
        } else {
            clearNotice();
        }
    }

    function showChat() {
        picker.hidden = true;
        chat.hidden = false;
    }

    async function start(exerciseId: string): Promise<void> {
        let session: SessionDto;
        try {
            session = await api.createSession(exerciseId, studentId);
        } catch (err) {
            state.lastOutcome = "error";
            notice("error", describe(err));
            return;
        }
        state.sessionId = session.session_id;
        state.exerciseId = session.exercise_id;
        state.messages = session.messages.slice();
        storeSession(storage, {
            sessionId: session.session_id,
            exerciseId: session.exercise_id,
        });
        clearNotice();
        renderAll(state.messages);
        showChat();
    }

    async function send(rawText: string): Promise<void> {
        const text = rawText.trim();
        if (!text || state.pending || state.sessionId === null) {
            return;
        }
        const sessionId = state.sessionId;
        setPending(true);
        clearNotice();
        // The student bubble goes up immediately; on failure the server
        // has not stored the turn, so it is taken down again and the
        // question returns to the input box.
        const student: MessageDto = {
            role: "student",
            content: text,
            timestamp: new Date().toISOString(),
            sequence: state.messages.length,
        };
        state.messages.push(student);
        const bubble = appendBubble(student);
        input.value = "";
        try {
            let result: PostMessageResult;
            try {
                result = await api.postMessage(sessionId, text);
            } catch (err) {
                if (err instanceof ApiError && err.status === 409) {
                    // someone else's turn is still in flight: queue this
                    // one and retry exactly once
                    await delay(retryDelayMs);
                    result = await api.postMessage(sessionId, text);
                } else {
                    throw err;
                }
            }
            state.messages.push(result.tutor_message);
            appendBubble(result.tutor_message);
            renderOutcome(result.outcome);
        } catch (err) {
            state.messages.pop();
            bubble?.remove();
            input.value = text;
            state.lastOutcome = "error";
            notice("error", describe(err), "Retry");
        } finally {
            setPending(false);
        }
    }

    function describe(err: unknown): string {
        if (err instanceof ApiError) {
            return err.status === 0
                ? "Cannot reach the tutor server."
                : err.message;
        }
        return String(err);
    }

    startButton.addEventListener("click", () => {
        if (select.value) {
            void start(select.value);
        }
    });
    composer.addEventListener("submit", (event) => {
        event.preventDefault();
        void send(input.value);
    });

    try {
        const exercises = await api.listExercises();
        for (const exercise of exercises) {
            const option = document.createElement("option");
            option.value = exercise.exercise_id;
            option.textContent = `${exercise.title} (${exercise.exercise_id})`;
            select.appendChild(option);
        }
    } catch (err) {
        state.lastOutcome = "error";
        notice("error", describe(err));
    }

    const stored = loadStoredSession(storage);
    if (stored !== null) {
        try {
            const session = await api.getSession(stored.sessionId);
            state.sessionId = session.session_id;
            state.exerciseId = session.exercise_id;
            state.messages = session.messages.slice();
            renderAll(state.messages);
            showChat();
        } catch (err) {
            if (err instanceof ApiError && err.status === 404) {
                // the server no longer knows this session; start over
                storeSession(storage, null);
            } else {
                state.lastOutcome = "error";
                notice("error", describe(err));
            }
        }
    }

    return {
        start,
        send,
        getState: () => ({ ...state, messages: state.messages.slice() }),
        root,
    };
}
